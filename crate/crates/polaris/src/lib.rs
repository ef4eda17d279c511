//! Radar-only landmark-based vehicle self-localization with a synthetic
//! polarimetric radar simulator.
//!
//! The crate covers the full chain: Doppler ego-motion estimation with
//! Nyquist zone augmentation, world-fixed polarimetric covariance
//! gridmapping, point/line landmark extraction, multi-drive map
//! construction, map matching with temporal smoothing, sliding-window
//! pose-graph optimization, and trajectory-error evaluation.
//!
//! Each stage is usable on its own; see the `examples/` directory for one
//! runnable demo per capability and the `polaris` binary for the
//! `simulate` / `map` / `localize` / `eval` pipeline commands.

pub mod config;
pub mod egomotion;
pub mod evaluation;
pub mod gridmap;
pub mod landmarks;
pub mod map_construction;
pub mod matching;
pub mod pipeline;
pub mod polarimetry;
pub mod pose_graph;
pub mod se2;
pub mod simulator;
pub mod spatial;

pub use se2::Pose2;
