//! placeholder
pub struct DetectionResult;
pub struct ModelConfig;
pub struct ModelParams;
