//! placeholder
pub fn finite_difference_check() {}
