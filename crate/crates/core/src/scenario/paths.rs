//! Geometric propagation: line of sight plus single-bounce specular paths off
//! roadside walls and vehicle faces, with axis-aligned box blockage.

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::drop::DropScenario;
use super::geometry::{Point, Reflector};
use super::mounts::MountPoint;
use crate::error::{Error, Result};
use crate::linalg::cis;
use crate::rng::{derive_seed, rng_from};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    /// Delay relative to the cluster, seconds.
    pub rel_delay: f64,
    pub rsu_shift: f64,
    pub vehicle_shift: f64,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub delay: f64,
    /// Angle at the RSU array, radians from broadside.
    pub rsu_angle: f64,
    /// Angle at the vehicle-side element or array.
    pub vehicle_angle: f64,
    pub rays: Vec<Ray>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub clusters: Vec<Cluster>,
    pub los: bool,
}

/// A single ray with cluster offsets folded in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatRay {
    pub delay: f64,
    pub rsu_angle: f64,
    pub vehicle_angle: f64,
    pub gain: Complex64,
}

impl PathSet {
    pub fn blocked() -> Self {
        PathSet { clusters: Vec::new(), los: false }
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.iter().all(|c| c.rays.is_empty())
    }

    pub fn rays(&self) -> impl Iterator<Item = FlatRay> + '_ {
        self.clusters.iter().flat_map(|c| {
            c.rays.iter().map(move |r| FlatRay {
                delay: c.delay + r.rel_delay,
                rsu_angle: c.rsu_angle + r.rsu_shift,
                vehicle_angle: c.vehicle_angle + r.vehicle_shift,
                gain: r.gain,
            })
        })
    }

    pub fn total_power(&self) -> f64 {
        self.rays().map(|r| r.gain.norm_sqr()).sum()
    }

    pub fn max_delay(&self) -> f64 {
        self.rays().map(|r| r.delay).fold(0.0, f64::max)
    }

    pub fn min_delay(&self) -> Option<f64> {
        self.rays().map(|r| r.delay).reduce(f64::min)
    }

    /// Copy with every cluster delay reduced by `offset`.
    pub fn advanced_by(&self, offset: f64) -> PathSet {
        let mut out = self.clone();
        for c in &mut out.clusters {
            c.delay -= offset;
        }
        out
    }

    pub fn strongest_power(&self) -> f64 {
        self.rays().map(|r| r.gain.norm_sqr()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Comm,
    Radar,
}

impl Band {
    fn tag(self) -> u64 {
        match self {
            Band::Comm => 0xC0,
            Band::Radar => 0xAD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    /// Wall plane `y = offset`, meters.
    pub y: f64,
    pub reflection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub walls: Vec<WallSpec>,
    pub vehicle_reflection: f64,
    pub comm_carrier_hz: f64,
    pub radar_carrier_hz: f64,
    pub rays_per_cluster: usize,
    /// Uniform azimuth spread of sub-rays around the specular direction.
    pub ray_spread_deg: f64,
    /// Uniform delay spread of sub-rays, seconds.
    pub ray_delay_spread: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            walls: vec![WallSpec { y: -8.0, reflection: 0.6 }, WallSpec { y: 22.0, reflection: 0.6 }],
            vehicle_reflection: 0.8,
            comm_carrier_hz: 73e9,
            radar_carrier_hz: 76e9,
            rays_per_cluster: 1,
            ray_spread_deg: 2.0,
            ray_delay_spread: 1e-9,
        }
    }
}

impl EnvironmentConfig {
    pub fn validate(&self) -> Result<()> {
        let coeffs = self.walls.iter().map(|w| w.reflection).chain([self.vehicle_reflection]);
        if coeffs.into_iter().any(|g| !(0.0..=1.0).contains(&g)) {
            return Err(Error::InvalidConfig("reflection coefficients must lie in [0, 1]".into()));
        }
        if self.rays_per_cluster == 0 || !(self.comm_carrier_hz > 0.0) || !(self.radar_carrier_hz > 0.0) {
            return Err(Error::InvalidConfig("environment: need rays_per_cluster >= 1 and positive carriers".into()));
        }
        if !(self.ray_spread_deg >= 0.0) || !(self.ray_delay_spread >= 0.0) {
            return Err(Error::InvalidConfig("environment: spreads must be non-negative".into()));
        }
        Ok(())
    }

    pub fn carrier(&self, band: Band) -> f64 {
        match band {
            Band::Comm => self.comm_carrier_hz,
            Band::Radar => self.radar_carrier_hz,
        }
    }
}

fn reflectors(drop: &DropScenario, env: &EnvironmentConfig) -> Vec<Reflector> {
    let mut out: Vec<Reflector> = env
        .walls
        .iter()
        .map(|w| Reflector { axis: 1, offset: w.y, span: None, height: None, coefficient: w.reflection, owner: None })
        .collect();
    for (i, v) in drop.vehicles.iter().enumerate() {
        if Some(i) == drop.ego_index {
            continue;
        }
        let b = v.bounding_box();
        let height = Some((b.min.z, b.max.z));
        let faces = [
            (0, b.min.x, (b.min.y, b.max.y)),
            (0, b.max.x, (b.min.y, b.max.y)),
            (1, b.min.y, (b.min.x, b.max.x)),
            (1, b.max.y, (b.min.x, b.max.x)),
        ];
        for (axis, offset, span) in faces {
            out.push(Reflector { axis, offset, span: Some(span), height, coefficient: env.vehicle_reflection, owner: Some(i) });
        }
    }
    out
}

fn leg_clear(drop: &DropScenario, a: &Point, b: &Point, skip: Option<usize>) -> bool {
    drop.vehicles.iter().enumerate().all(|(i, v)| {
        Some(i) == drop.ego_index || Some(i) == skip || !v.bounding_box().blocks_segment(a, b)
    })
}

struct Candidate {
    length: f64,
    departure: Vector3<f64>,
    arrival: Vector3<f64>,
    coefficient: f64,
    los: bool,
}

/// Trace every admissible path between a vehicle-side mount and the RSU
/// array. Paths whose departure or arrival falls outside either element's
/// first null are dropped, so a fully blocked link yields an empty set.
///
/// Geometry (delays, angles) depends only on the mounts and the drop; the
/// band changes the free-space loss and the random ray phases.
pub fn synthesize_paths(
    drop: &DropScenario,
    env: &EnvironmentConfig,
    rsu: &MountPoint,
    vehicle: &MountPoint,
    band: Band,
    seed: u64,
) -> PathSet {
    let tx = vehicle.position;
    let rx = rsu.position;
    let mut candidates = Vec::new();
    if leg_clear(drop, &tx, &rx, None) {
        let d = rx - tx;
        candidates.push(Candidate {
            length: d.norm(),
            departure: d.normalize(),
            arrival: (-d).normalize(),
            coefficient: 1.0,
            los: true,
        });
    }
    for refl in reflectors(drop, env) {
        let Some(p) = refl.reflection_point(&tx, &rx) else { continue };
        if !leg_clear(drop, &tx, &p, refl.owner) || !leg_clear(drop, &p, &rx, refl.owner) {
            continue;
        }
        let (l1, l2) = (p - tx, rx - p);
        candidates.push(Candidate {
            length: l1.norm() + l2.norm(),
            departure: l1.normalize(),
            arrival: (-l2).normalize(),
            coefficient: refl.coefficient,
            los: false,
        });
    }

    let wavelength = SPEED_OF_LIGHT / env.carrier(band);
    let n_rays = env.rays_per_cluster;
    let mut clusters = Vec::new();
    let mut los = false;
    for (ci, c) in candidates.iter().enumerate() {
        if !vehicle.pattern.covers(vehicle.off_axis(&c.departure)) || !rsu.pattern.covers(rsu.off_axis(&c.arrival)) {
            continue;
        }
        let rsu_angle = rsu.ula_angle(&c.arrival);
        let vehicle_angle = vehicle.ula_angle(&c.departure);
        let delay = c.length / SPEED_OF_LIGHT;
        let amplitude = wavelength / (4.0 * PI * c.length) * c.coefficient / (n_rays as f64).sqrt();
        // geometry stream is band independent, phase stream is not
        let mut geo_rng = rng_from(derive_seed(seed, 0x6E0, ci as u64));
        let mut phase_rng = rng_from(derive_seed(seed, band.tag(), ci as u64));
        let mut rays = Vec::with_capacity(n_rays);
        for ri in 0..n_rays {
            let (dep, arr, rel_delay) = if ri == 0 {
                (c.departure, c.arrival, 0.0)
            } else {
                let spread = env.ray_spread_deg.to_radians();
                let s_dep = (geo_rng.random::<f64>() - 0.5) * spread;
                let s_arr = (geo_rng.random::<f64>() - 0.5) * spread;
                let dt = geo_rng.random::<f64>() * env.ray_delay_spread;
                let rot = |v: &Vector3<f64>, a: f64| Rotation3::from_axis_angle(&Vector3::z_axis(), a) * v;
                (rot(&c.departure, s_dep), rot(&c.arrival, s_arr), dt)
            };
            let phase = phase_rng.random::<f64>() * TAU;
            let g_v = vehicle.amplitude_gain(&dep);
            let g_r = rsu.amplitude_gain(&arr);
            if g_v == 0.0 || g_r == 0.0 {
                continue;
            }
            rays.push(Ray {
                rel_delay,
                rsu_shift: rsu.ula_angle(&arr) - rsu_angle,
                vehicle_shift: vehicle.ula_angle(&dep) - vehicle_angle,
                gain: cis(phase) * (amplitude * g_v * g_r),
            });
        }
        if rays.is_empty() {
            continue;
        }
        los |= c.los;
        clusters.push(Cluster { delay, rsu_angle, vehicle_angle, rays });
    }
    PathSet { clusters, los }
}

/// Path set between the RSU and every mount of the ego vehicle.
pub fn synthesize_all(
    drop: &DropScenario,
    env: &EnvironmentConfig,
    rsu: &MountPoint,
    mounts: &[MountPoint],
    band: Band,
    seed: u64,
) -> Vec<PathSet> {
    mounts
        .iter()
        .enumerate()
        .map(|(i, m)| synthesize_paths(drop, env, rsu, m, band, derive_seed(seed, 0x9A7, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::drop::{DropConfig, Vehicle, VehicleKind};
    use crate::scenario::mounts::{mount_points, rsu_mount, MountKind, MountSide};

    fn vehicle(x: f64, lane: usize, kind: VehicleKind, cfg: &DropConfig) -> Vehicle {
        let dims = match kind {
            VehicleKind::Car => cfg.car_dims,
            VehicleKind::Truck => cfg.truck_dims,
        };
        Vehicle {
            lane,
            kind,
            center: Point::new(x, cfg.lane_center_y(lane), dims[2] / 2.0),
            dims,
            speed_kmh: cfg.lane_speeds_kmh[lane],
            heading: cfg.lane_heading(lane),
        }
    }

    fn lone_ego(cfg: &DropConfig, lane: usize) -> DropScenario {
        DropScenario { vehicles: vec![vehicle(4.0, lane, VehicleKind::Car, cfg)], ego_index: Some(0), rng_seed: 0 }
    }

    fn right_array(drop: &DropScenario) -> MountPoint {
        *mount_points(drop.ego().unwrap(), MountKind::CommArray)
            .iter()
            .find(|m| m.side == MountSide::Right)
            .unwrap()
    }

    #[test]
    fn free_space_gives_single_los_ray() {
        let cfg = DropConfig::default();
        let env = EnvironmentConfig { walls: vec![], ..EnvironmentConfig::default() };
        let drop = lone_ego(&cfg, 0);
        let rsu = rsu_mount(&cfg, 0.0);
        let m = right_array(&drop);
        let ps = synthesize_paths(&drop, &env, &rsu, &m, Band::Comm, 1);
        assert!(ps.los);
        let rays: Vec<_> = ps.rays().collect();
        assert_eq!(rays.len(), 1);
        let dist = (rsu.position - m.position).norm();
        assert!((rays[0].delay - dist / SPEED_OF_LIGHT).abs() < 1e-18);
    }

    #[test]
    fn truck_between_blocks_los() {
        let cfg = DropConfig::default();
        let env = EnvironmentConfig { walls: vec![], ..EnvironmentConfig::default() };
        let mut drop = lone_ego(&cfg, 3);
        drop.vehicles.push(vehicle(2.0, 1, VehicleKind::Truck, &cfg));
        let rsu = rsu_mount(&cfg, 0.0);
        let ego = drop.ego().unwrap().clone();
        for m in mount_points(&ego, MountKind::CommArray) {
            let ps = synthesize_paths(&drop, &env, &rsu, &m, Band::Comm, 1);
            assert!(!ps.los, "{:?}", m.side);
        }
    }

    #[test]
    fn wall_bounce_matches_fermat_search() {
        let cfg = DropConfig::default();
        let env = EnvironmentConfig {
            walls: vec![WallSpec { y: 22.0, reflection: 0.6 }],
            ..EnvironmentConfig::default()
        };
        let mut drop = lone_ego(&cfg, 0);
        drop.vehicles[0].heading = 1.0;
        let rsu = rsu_mount(&cfg, 0.0);
        let left = *mount_points(drop.ego().unwrap(), MountKind::CommArray)
            .iter()
            .find(|m| m.side == MountSide::Left)
            .unwrap();
        let ps = synthesize_paths(&drop, &env, &rsu, &left, Band::Comm, 3);
        // the left array faces away from the RSU, so only the wall bounce survives
        assert!(!ps.los);
        assert_eq!(ps.clusters.len(), 1);
        let bounce = &ps.clusters[0];
        // brute-force the reflection point on the wall minimising path length
        let (tx, rx) = (left.position, rsu.position);
        let mut best = (f64::INFINITY, Point::zeros());
        let steps = 4000;
        for ix in 0..=steps {
            let x = -60.0 + 120.0 * ix as f64 / steps as f64;
            for iz in 0..=100 {
                let z = 8.0 * iz as f64 / 100.0;
                let p = Point::new(x, 22.0, z);
                let len = (p - tx).norm() + (rx - p).norm();
                if len < best.0 {
                    best = (len, p);
                }
            }
        }
        // refine around the coarse optimum
        let (mut lo_x, mut hi_x, mut lo_z, mut hi_z) = (best.1.x - 0.05, best.1.x + 0.05, best.1.z - 0.1, best.1.z + 0.1);
        for _ in 0..60 {
            let f = |x: f64, z: f64| {
                let p = Point::new(x, 22.0, z);
                (p - tx).norm() + (rx - p).norm()
            };
            let (mx, mz) = ((lo_x + hi_x) / 2.0, (lo_z + hi_z) / 2.0);
            if f(mx - 1e-7, mz) < f(mx + 1e-7, mz) { hi_x = mx } else { lo_x = mx }
            if f(mx, mz - 1e-7) < f(mx, mz + 1e-7) { hi_z = mz } else { lo_z = mz }
        }
        let p = Point::new((lo_x + hi_x) / 2.0, 22.0, (lo_z + hi_z) / 2.0);
        let arrival = (p - rx).normalize();
        assert!((rsu.ula_angle(&arrival) - bounce.rsu_angle).abs() < 1e-5);
        let len = (p - tx).norm() + (rx - p).norm();
        assert!((len / SPEED_OF_LIGHT - bounce.delay).abs() < 1e-14);
    }

    #[test]
    fn synthesis_is_pure_and_bands_share_geometry() {
        let cfg = DropConfig::default();
        let env = EnvironmentConfig { rays_per_cluster: 3, ..EnvironmentConfig::default() };
        let mut drop = crate::scenario::generate_drop(&cfg, 11).unwrap();
        drop.ego_index = Some(crate::scenario::select_ego(&cfg, &drop, 120f64.to_radians(), 2).unwrap());
        let rsu = rsu_mount(&cfg, 0.0);
        for m in mount_points(drop.ego().unwrap(), MountKind::CommArray) {
            let a = synthesize_paths(&drop, &env, &rsu, &m, Band::Comm, 77);
            let b = synthesize_paths(&drop, &env, &rsu, &m, Band::Comm, 77);
            assert_eq!(a, b);
            let r = synthesize_paths(&drop, &env, &rsu, &m, Band::Radar, 77);
            assert_eq!(a.clusters.len(), r.clusters.len());
            for (x, y) in a.rays().zip(r.rays()) {
                assert_eq!(x.delay, y.delay);
                assert_eq!(x.rsu_angle, y.rsu_angle);
                assert_eq!(x.vehicle_angle, y.vehicle_angle);
            }
        }
    }
}
