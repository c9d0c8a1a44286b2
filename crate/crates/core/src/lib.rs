//! LiDAR + RGB object classification with spoken detection summaries.
//!
//! The pipeline mirrors a KITTI-style workflow end to end:
//!
//! 1. [`kitti`] parses velodyne `.bin` scans, label/calib text files and RGB
//!    rasters, and crops per-object samples out of full frames.
//! 2. [`preprocess`] conditions each sample into fixed-shape network inputs
//!    (1024x3 normalized points, 224x224x3 unit-range image).
//! 3. [`autodiff`] is a small reverse-mode engine providing exactly the
//!    operators the classifier needs, at f64 precision throughout.
//! 4. [`model`] assembles the T-Net, the per-point LiDAR branch, the RGB
//!    convolution branch and the fused classification head.
//! 5. [`train`] runs Adam with class-weighted cross-entropy, early stopping
//!    and reduce-LR-on-plateau, and computes per-class metrics.
//! 6. [`voice`] turns predictions into spoken phrases ("Pedestrian detected,
//!    3 meters away, 90% confidence") with latency accounting.
//!
//! Everything is deterministic for a fixed seed; see the individual module
//! docs for the exact seeding rules.

pub mod autodiff;
pub mod kitti;
pub mod model;
pub mod preprocess;
pub mod train;
pub mod voice;

pub use autodiff::{Graph, Tensor, Var};
pub use kitti::{CalibData, ObjectLabel, PointCloud, RgbImage, Sample};
pub use model::{DetectionResult, ModelConfig, ModelParams};
pub use preprocess::{ProcessedImage, ProcessedPoints};
pub use train::{ClassMetrics, EpochReport, FitConfig};
pub use voice::{LatencyReport, VoicePhrase};

/// The four object classes, index == class id everywhere in this crate.
pub const CLASS_NAMES: [&str; 4] = ["Car", "Pedestrian", "Cyclist", "DontCare"];

/// Number of object classes.
pub const NUM_CLASSES: usize = 4;

/// Class id of the DontCare class (suppressed in voice output).
pub const DONT_CARE: usize = 3;
