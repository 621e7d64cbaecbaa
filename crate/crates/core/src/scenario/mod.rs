//! Vehicle drops, mount geometry and geometric path synthesis.

mod drop;
mod geometry;
mod mounts;
mod paths;

pub use drop::{
    dump_scenario, generate_drop, load_scenario, rsu_azimuth, sample_gap, select_ego, DropConfig, DropScenario,
    Vehicle, VehicleKind,
};
pub use geometry::{Aabb, Point, Reflector};
pub use mounts::{
    mount_points, rsu_mount, ElementPattern, MountKind, MountPoint, MountSide, COMM_HEIGHT, RADAR_HEIGHT,
};
pub use paths::{
    synthesize_all, synthesize_paths, Band, Cluster, EnvironmentConfig, FlatRay, PathSet, Ray, WallSpec,
    SPEED_OF_LIGHT,
};
