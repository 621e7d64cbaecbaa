//! Random vehicle drops on a multi-lane urban road and ego selection.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Point};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropConfig {
    pub lane_count: usize,
    /// Meters.
    pub lane_width: f64,
    /// One speed per lane, km/h.
    pub lane_speeds_kmh: Vec<f64>,
    pub car_fraction: f64,
    /// Length, width, height in meters.
    pub car_dims: [f64; 3],
    pub truck_dims: [f64; 3],
    pub road_length: f64,
    pub rsu_height: f64,
    /// RSU mast foot; the z coordinate is replaced by `rsu_height`.
    pub rsu_position: [f64; 3],
    pub min_gap: f64,
    /// Seconds; the exponential gap mean is `speed * headway_time`.
    pub headway_time: f64,
}

impl Default for DropConfig {
    fn default() -> Self {
        DropConfig {
            lane_count: 4,
            lane_width: 3.5,
            lane_speeds_kmh: vec![60.0, 50.0, 25.0, 15.0],
            car_fraction: 0.8,
            car_dims: [5.0, 2.0, 1.6],
            truck_dims: [13.0, 2.6, 3.0],
            road_length: 240.0,
            rsu_height: 5.0,
            rsu_position: [0.0, -3.0, 5.0],
            min_gap: 2.0,
            headway_time: 2.0,
        }
    }
}

impl DropConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("scenario: {m}")));
        if self.lane_count == 0 || self.lane_count != self.lane_speeds_kmh.len() {
            return bad("lane_count must equal the number of lane speeds and be positive");
        }
        if !(0.0..=1.0).contains(&self.car_fraction) {
            return bad("car_fraction must lie in [0, 1]");
        }
        let dims = self.car_dims.iter().chain(&self.truck_dims);
        if dims.chain([&self.lane_width, &self.road_length, &self.rsu_height]).any(|v| !(*v > 0.0)) {
            return bad("all dimensions must be positive");
        }
        if self.lane_speeds_kmh.iter().any(|s| !(*s > 0.0)) || !(self.headway_time > 0.0) {
            return bad("lane speeds and headway must be positive");
        }
        if !(self.min_gap >= 0.0) {
            return bad("min_gap must be non-negative");
        }
        Ok(())
    }

    pub fn lane_center_y(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// Near half of the lanes drive towards +x, the far half towards -x.
    pub fn lane_heading(&self, lane: usize) -> f64 {
        if lane < self.lane_count.div_ceil(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn rsu_point(&self) -> Point {
        Point::new(self.rsu_position[0], self.rsu_position[1], self.rsu_height)
    }

    pub fn road_width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width
    }

    /// Stable fingerprint written into scenario dumps.
    pub fn fingerprint(&self) -> u64 {
        fnv1a(format!("{self:?}").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleKind {
    Car,
    Truck,
}

impl VehicleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleKind::Car => "car",
            VehicleKind::Truck => "truck",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub lane: usize,
    pub kind: VehicleKind,
    /// Box center; z is half the height.
    pub center: Point,
    pub dims: [f64; 3],
    pub speed_kmh: f64,
    /// +1 drives towards +x, -1 towards -x.
    pub heading: f64,
}

impl Vehicle {
    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_center_dims(self.center, self.dims)
    }

    pub fn length(&self) -> f64 {
        self.dims[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropScenario {
    pub vehicles: Vec<Vehicle>,
    pub ego_index: Option<usize>,
    pub rng_seed: u64,
}

impl DropScenario {
    pub fn ego(&self) -> Option<&Vehicle> {
        self.ego_index.map(|i| &self.vehicles[i])
    }

    pub fn lane(&self, lane: usize) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.iter().filter(move |v| v.lane == lane)
    }
}

/// One bumper-to-bumper gap: `max(min_gap, X)` with `X ~ Exp(mean)`.
pub fn sample_gap<R: Rng + ?Sized>(rng: &mut R, min_gap: f64, mean: f64) -> f64 {
    let x = Exp::new(1.0 / mean).expect("positive gap mean").sample(rng);
    x.max(min_gap)
}

pub fn generate_drop(cfg: &DropConfig, seed: u64) -> Result<DropScenario> {
    cfg.validate()?;
    let mut rng = rng_from(seed);
    let x_start = cfg.rsu_position[0] - cfg.road_length / 2.0;
    let x_end = x_start + cfg.road_length;
    let shortest = cfg.car_dims[0].min(cfg.truck_dims[0]);
    let mut vehicles = Vec::new();
    for lane in 0..cfg.lane_count {
        if cfg.road_length < shortest {
            return Err(Error::EmptyLane { lane, road_length: cfg.road_length });
        }
        let speed = cfg.lane_speeds_kmh[lane];
        let gap_mean = speed / 3.6 * cfg.headway_time;
        let heading = cfg.lane_heading(lane);
        let y = cfg.lane_center_y(lane);
        let draw_kind = |rng: &mut rand_chacha::ChaCha8Rng| {
            if rng.random::<f64>() < cfg.car_fraction {
                VehicleKind::Car
            } else {
                VehicleKind::Truck
            }
        };
        let dims_of = |k: VehicleKind| match k {
            VehicleKind::Car => cfg.car_dims,
            VehicleKind::Truck => cfg.truck_dims,
        };
        // rear bumper of the next vehicle, randomly phased within one gap
        let first_gap = sample_gap(&mut rng, cfg.min_gap, gap_mean);
        let mut kind = draw_kind(&mut rng);
        if dims_of(kind)[0] > cfg.road_length {
            kind = if cfg.car_dims[0] <= cfg.truck_dims[0] { VehicleKind::Car } else { VehicleKind::Truck };
        }
        let slack = cfg.road_length - dims_of(kind)[0];
        let mut cursor = x_start + rng.random::<f64>() * first_gap.min(slack);
        let mut placed = 0usize;
        loop {
            let dims = dims_of(kind);
            if cursor + dims[0] > x_end {
                break;
            }
            let center_x = cursor + dims[0] / 2.0;
            vehicles.push(Vehicle {
                lane,
                kind,
                center: Point::new(center_x, y, dims[2] / 2.0),
                dims,
                speed_kmh: speed,
                heading,
            });
            placed += 1;
            cursor += dims[0] + sample_gap(&mut rng, cfg.min_gap, gap_mean);
            kind = draw_kind(&mut rng);
        }
        if placed == 0 {
            return Err(Error::EmptyLane { lane, road_length: cfg.road_length });
        }
    }
    Ok(DropScenario { vehicles, ego_index: None, rng_seed: seed })
}

/// Azimuth of a point seen from the RSU, measured from its broadside (+y).
pub fn rsu_azimuth(cfg: &DropConfig, p: &Point) -> f64 {
    let rsu = cfg.rsu_point();
    (p.x - rsu.x).atan2(p.y - rsu.y)
}

/// Draw the ego vehicle uniformly among vehicles whose center lies strictly
/// inside the RSU field of view.
pub fn select_ego(cfg: &DropConfig, drop: &DropScenario, fov: f64, seed: u64) -> Result<usize> {
    let candidates: Vec<usize> = drop
        .vehicles
        .iter()
        .enumerate()
        .filter(|(_, v)| rsu_azimuth(cfg, &v.center).abs() < fov / 2.0)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoCandidate);
    }
    let mut rng = rng_from(seed);
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// Line-oriented dump: a header with seed, ego and config fingerprint, then
/// `lane kind x y z L W H speed_kmh` per vehicle.
pub fn dump_scenario(cfg: &DropConfig, drop: &DropScenario) -> String {
    let ego = drop.ego_index.map_or("-".to_string(), |i| i.to_string());
    let mut out = format!("# seed={} ego={} config={:016x}\n", drop.rng_seed, ego, cfg.fingerprint());
    for v in &drop.vehicles {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {}\n",
            v.lane,
            v.kind.as_str(),
            v.center.x,
            v.center.y,
            v.center.z,
            v.dims[0],
            v.dims[1],
            v.dims[2],
            v.speed_kmh
        ));
    }
    out
}

pub fn load_scenario(cfg: &DropConfig, text: &str) -> Result<DropScenario> {
    let perr = |m: String| Error::Parse(format!("scenario dump: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| perr("empty input".into()))?;
    let mut seed = None;
    let mut ego_index = None;
    let mut fingerprint = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        match tok.split_once('=') {
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            Some(("ego", "-")) => {}
            Some(("ego", v)) => ego_index = Some(v.parse::<usize>().map_err(|e| perr(e.to_string()))?),
            Some(("config", v)) => fingerprint = u64::from_str_radix(v, 16).ok(),
            _ => return Err(perr(format!("unexpected header token {tok:?}"))),
        }
    }
    let seed = seed.ok_or_else(|| perr("missing seed".into()))?;
    if fingerprint != Some(cfg.fingerprint()) {
        return Err(perr("config fingerprint mismatch".into()));
    }
    let mut vehicles = Vec::new();
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 9 {
            return Err(perr(format!("expected 9 fields, got {}: {line:?}", t.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("{s:?}: {e}")));
        let lane: usize = t[0].parse().map_err(|e| perr(format!("lane: {e}")))?;
        if lane >= cfg.lane_count {
            return Err(perr(format!("lane {lane} out of range")));
        }
        let kind = match t[1] {
            "car" => VehicleKind::Car,
            "truck" => VehicleKind::Truck,
            other => return Err(perr(format!("unknown kind {other:?}"))),
        };
        vehicles.push(Vehicle {
            lane,
            kind,
            center: Point::new(num(t[2])?, num(t[3])?, num(t[4])?),
            dims: [num(t[5])?, num(t[6])?, num(t[7])?],
            speed_kmh: num(t[8])?,
            heading: cfg.lane_heading(lane),
        });
    }
    if let Some(i) = ego_index {
        if i >= vehicles.len() {
            return Err(perr(format!("ego index {i} out of range")));
        }
    }
    Ok(DropScenario { vehicles, ego_index, rng_seed: seed })
}
