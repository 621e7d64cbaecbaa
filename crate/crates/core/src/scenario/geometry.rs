use nalgebra::Vector3;

pub type Point = Vector3<f64>;

/// Axis-aligned box given by its two extreme corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn from_center_dims(center: Point, dims: [f64; 3]) -> Self {
        let half = Vector3::new(dims[0], dims[1], dims[2]) * 0.5;
        Aabb { min: center - half, max: center + half }
    }

    /// True when the open segment `a -> b` passes through the box interior.
    /// Grazing contact with a face does not count.
    pub fn blocks_segment(&self, a: &Point, b: &Point) -> bool {
        const EPS: f64 = 1e-9;
        let dir = b - a;
        let mut t0 = EPS;
        let mut t1 = 1.0 - EPS;
        for k in 0..3 {
            let lo = self.min[k] + EPS;
            let hi = self.max[k] - EPS;
            if dir[k].abs() < 1e-15 {
                if a[k] <= lo || a[k] >= hi {
                    return false;
                }
                continue;
            }
            let mut ta = (lo - a[k]) / dir[k];
            let mut tb = (hi - a[k]) / dir[k];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 >= t1 {
                return false;
            }
        }
        true
    }
}

/// Finite planar reflector: a vertical rectangle or an unbounded wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    /// Axis normal to the plane (0 = x, 1 = y).
    pub axis: usize,
    pub offset: f64,
    /// Extent along the other horizontal axis; `None` means unbounded.
    pub span: Option<(f64, f64)>,
    /// Height range; `None` means unbounded.
    pub height: Option<(f64, f64)>,
    pub coefficient: f64,
    /// Vehicle owning the face, so it can be skipped in blockage tests.
    pub owner: Option<usize>,
}

impl Reflector {
    /// Specular reflection point of the path `a -> plane -> b`, if both ends lie
    /// strictly on the same side and the point falls inside the reflector.
    pub fn reflection_point(&self, a: &Point, b: &Point) -> Option<Point> {
        let k = self.axis;
        let da = a[k] - self.offset;
        let db = b[k] - self.offset;
        if da * db <= 0.0 || da.abs() < 1e-9 || db.abs() < 1e-9 {
            return None;
        }
        let mut image = *a;
        image[k] = 2.0 * self.offset - a[k];
        let t = (self.offset - image[k]) / (b[k] - image[k]);
        let p = image + (b - image) * t;
        let other = 1 - k;
        if let Some((lo, hi)) = self.span {
            if p[other] < lo || p[other] > hi {
                return None;
            }
        }
        if let Some((lo, hi)) = self.height {
            if p[2] < lo || p[2] > hi {
                return None;
            }
        }
        Some(p)
    }
}
