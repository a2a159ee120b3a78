//! Vision-to-audio sensory substitution: simulated marker detection, the
//! 3 x 5 cell sonification grid, binaural rendering, task simulation with
//! scripted agents, and the statistics used to compare 2D and 3D modes.

pub mod audio;
pub mod batch;
pub mod encoder;
pub mod engine;
pub mod scene;
pub mod stats;
pub mod tasks;

pub use encoder::{ActiveCellSet, CellActivation, CellGrid, CellId, Mode};
pub use engine::{Engine, EngineConfig};
pub use scene::{CameraIntrinsics, CameraPose, Detection, DetectionProfile, Marker, Scene, Vec3};
