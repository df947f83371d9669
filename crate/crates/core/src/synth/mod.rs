//! Synthetic RGB-D scenes with exact ground truth.

pub mod emit;
pub mod presets;
pub mod render;
pub mod spec;

pub use emit::{emit_sequence, frames, ground_truth, in_swept_volume, GroundTruth, ObjectState};
pub use render::{render, Rendered};
pub use spec::{Motion, Primitive, SceneSpec, Texture};
