//! placeholder
pub struct LatencyReport;
pub struct VoicePhrase;
