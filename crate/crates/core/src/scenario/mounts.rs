//! Antenna and radar mount points on vehicles and at the RSU.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

use super::drop::{DropConfig, Vehicle};
use super::geometry::Point;

pub const COMM_HEIGHT: f64 = 1.6;
pub const RADAR_HEIGHT: f64 = 0.75;
pub const SIDE_RADAR_ROTATION_DEG: f64 = 10.0;

/// Rotationally symmetric element power pattern with a cosine-shaped main
/// lobe, exactly zero beyond the first null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPattern {
    /// Full 3 dB beamwidth in degrees.
    pub hpbw_deg: f64,
    /// Full first-null beamwidth in degrees.
    pub fnbw_deg: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern { hpbw_deg: 120.0, fnbw_deg: 150.0 }
    }
}

impl ElementPattern {
    fn exponent(&self) -> f64 {
        let ratio = self.hpbw_deg / self.fnbw_deg;
        0.5f64.ln() / (FRAC_PI_2 * ratio).cos().ln()
    }

    /// Power gain at `off_axis` radians from boresight; 1 on boresight, 1/2 at
    /// the 3 dB edge, 0 at and beyond the first null.
    pub fn power_gain(&self, off_axis: f64) -> f64 {
        let half_null = (self.fnbw_deg / 2.0).to_radians();
        let psi = off_axis.abs();
        if psi >= half_null {
            return 0.0;
        }
        (FRAC_PI_2 * psi / half_null).cos().powf(self.exponent())
    }

    pub fn covers(&self, off_axis: f64) -> bool {
        off_axis.abs() < (self.fnbw_deg / 2.0).to_radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MountKind {
    CommArray,
    RadarTx,
    RsuArray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MountSide {
    Front,
    Back,
    Left,
    Right,
    FrontLeft,
    FrontRight,
    BackLeft,
    BackRight,
    Rsu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountPoint {
    pub position: Point,
    /// Boresight azimuth in the horizontal plane, from +x towards +y.
    pub boresight: f64,
    /// Boresight elevation, negative when tilted down.
    pub tilt: f64,
    pub kind: MountKind,
    pub side: MountSide,
    pub pattern: ElementPattern,
}

impl MountPoint {
    pub fn boresight_vector(&self) -> Vector3<f64> {
        Vector3::new(
            self.boresight.cos() * self.tilt.cos(),
            self.boresight.sin() * self.tilt.cos(),
            self.tilt.sin(),
        )
    }

    /// Horizontal array axis: boresight azimuth rotated by -90 degrees.
    pub fn array_axis(&self) -> Vector3<f64> {
        Vector3::new(self.boresight.sin(), -self.boresight.cos(), 0.0)
    }

    /// ULA angle of a unit direction: `asin(direction . axis)`.
    pub fn ula_angle(&self, direction: &Vector3<f64>) -> f64 {
        direction.dot(&self.array_axis()).clamp(-1.0, 1.0).asin()
    }

    pub fn off_axis(&self, direction: &Vector3<f64>) -> f64 {
        direction.dot(&self.boresight_vector()).clamp(-1.0, 1.0).acos()
    }

    pub fn amplitude_gain(&self, direction: &Vector3<f64>) -> f64 {
        self.pattern.power_gain(self.off_axis(direction)).sqrt()
    }
}

/// Four communication arrays (front, back, left, right at 1.6 m) or four
/// corner radars at 0.75 m whose side-looking boresights are rotated 10
/// degrees towards the front (front pair) or back (rear pair).
pub fn mount_points(vehicle: &Vehicle, kind: MountKind) -> Vec<MountPoint> {
    let heading_az = if vehicle.heading >= 0.0 { 0.0 } else { std::f64::consts::PI };
    let (half_l, half_w) = (vehicle.dims[0] / 2.0, vehicle.dims[1] / 2.0);
    let fwd = Vector3::new(heading_az.cos(), heading_az.sin(), 0.0);
    let left = Vector3::new(-fwd.y, fwd.x, 0.0);
    let ground = Point::new(vehicle.center.x, vehicle.center.y, 0.0);
    let pattern = ElementPattern::default();
    let at = |dl: f64, dw: f64, h: f64| ground + fwd * dl + left * dw + Vector3::new(0.0, 0.0, h);
    let rot = SIDE_RADAR_ROTATION_DEG.to_radians();
    let make = |position: Point, boresight: f64, side: MountSide| MountPoint {
        position,
        boresight: wrap_angle(boresight),
        tilt: 0.0,
        kind,
        side,
        pattern,
    };
    match kind {
        MountKind::CommArray => vec![
            make(at(half_l, 0.0, COMM_HEIGHT), heading_az, MountSide::Front),
            make(at(-half_l, 0.0, COMM_HEIGHT), heading_az + std::f64::consts::PI, MountSide::Back),
            make(at(0.0, half_w, COMM_HEIGHT), heading_az + FRAC_PI_2, MountSide::Left),
            make(at(0.0, -half_w, COMM_HEIGHT), heading_az - FRAC_PI_2, MountSide::Right),
        ],
        MountKind::RadarTx => vec![
            make(at(half_l, half_w, RADAR_HEIGHT), heading_az + FRAC_PI_2 - rot, MountSide::FrontLeft),
            make(at(half_l, -half_w, RADAR_HEIGHT), heading_az - FRAC_PI_2 + rot, MountSide::FrontRight),
            make(at(-half_l, half_w, RADAR_HEIGHT), heading_az + FRAC_PI_2 + rot, MountSide::BackLeft),
            make(at(-half_l, -half_w, RADAR_HEIGHT), heading_az - FRAC_PI_2 - rot, MountSide::BackRight),
        ],
        MountKind::RsuArray => Vec::new(),
    }
}

/// RSU array facing the road (+y), tilted down towards the middle of the
/// carriageway. `z_offset` separates the radar array from the comm array.
pub fn rsu_mount(cfg: &DropConfig, z_offset: f64) -> MountPoint {
    let pos = cfg.rsu_point() + Vector3::new(0.0, 0.0, z_offset);
    let aim = Point::new(pos.x, cfg.road_width() / 2.0, 0.0);
    let d = aim - pos;
    let tilt = d.z.atan2((d.x * d.x + d.y * d.y).sqrt());
    MountPoint {
        position: pos,
        boresight: FRAC_PI_2,
        tilt,
        kind: MountKind::RsuArray,
        side: MountSide::Rsu,
        pattern: ElementPattern::default(),
    }
}

fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = a.rem_euclid(t);
    if w > std::f64::consts::PI {
        w - t
    } else {
        w
    }
}
