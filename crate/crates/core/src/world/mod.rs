//! Simulated environment: rectangle maps, an ideal 2-D lidar, a ternary
//! occupancy grid built from its scans, distance queries and A* planning.

mod grid;
mod map;
mod plan;

pub use grid::{dist_to_obstacles, update_grid, Cell, GridMetadata, OccupancyGrid};
pub use map::{raycast, Beam, GroundTruthMap, LidarSpec, Pose2, Rect};
pub use plan::{astar, inflate, plan_path, plan_toward, BlockedMask, PlanResult};
