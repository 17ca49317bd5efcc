//! The world the vessel plans in: a static occupancy grid decomposed into
//! convex pieces, and moving obstacles modelled as ellipses.

mod decomposition;
mod grid;
mod obstacles;

pub use decomposition::{
    static_constraint_residual, static_constraints_for, ConvexPiece, LinearConstraint, StaticMap,
};
pub use grid::{GridMeta, OccupancyGrid};
pub use obstacles::{
    dynamic_constraint_value, point_ellipse_distance, predict_from_state, predict_obstacle,
    ObstacleInfo, ObstaclePrediction, ObstacleSample, ObstacleState, ObstacleTrack, VesselClass,
};
