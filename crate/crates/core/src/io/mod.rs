//! Sequence, mask, flow, keypoint, trajectory and cloud file formats.

pub mod assoc;
pub mod cloud;
pub mod flow;
pub mod images;
pub mod keypoints;
pub mod mask;
pub mod sequence;
pub mod trajectory;

pub use assoc::associate;
pub use cloud::{read_cloud, write_cloud};
pub use flow::{load_flow, write_flow};
pub use keypoints::{load_keypoints, Keypoint, TRUNK_JOINTS};
pub use mask::{load_mask, write_mask, ClassInfo, ClassRegistry, InstanceInfo, PanopticMask};
pub use sequence::{load_sequence, Frame, Sequence, SequenceConfig};
pub use trajectory::{read_trajectory, write_trajectory, Trajectory};
