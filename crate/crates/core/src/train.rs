//! placeholder
pub struct ClassMetrics;
pub struct EpochReport;
pub struct FitConfig;
