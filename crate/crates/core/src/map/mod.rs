//! Static sparse landmarks, dense fused clouds and occupancy octrees.

pub mod dense;
pub mod octree;
pub mod sparse;
