//! Exploration planning in dynamic 3D environments.
//!
//! The crate couples a voxel internal map, constant-velocity obstacle
//! prediction, information-gain estimation, a time-aware sampling-based
//! local planner and a frontier-cache global planner with a deterministic
//! discrete-time simulator. The numeric layers are generic over the scalar
//! type; the planning and simulation layers use the [`Real`] alias.

pub mod error;
pub mod gain;
pub mod geometry;
pub mod map;
pub mod planner_global;
pub mod planner_local;
pub mod prediction;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete scalar used by the planners, simulator and benchmark harness.
pub type Real = f64;

/// 3-vector over [`Real`].
pub type Vec3 = nalgebra::Vector3<Real>;

/// Pose over [`Real`].
pub type Pose = geometry::Pose<Real>;

/// Bounding box over [`Real`].
pub type Aabb = geometry::Aabb<Real>;

/// Map grid over [`Real`].
pub type VoxelGrid = map::VoxelGrid<Real>;

/// Ground truth over [`Real`].
pub type GroundTruth = map::GroundTruth<Real>;
