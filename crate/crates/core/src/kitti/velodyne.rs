//! Velodyne `.bin` scans: consecutive little-endian f32 quadruplets
//! `(x, y, z, intensity)`, 16 bytes per point.

use super::{KittiError, PointCloud};

/// Parse a velodyne binary scan. Coordinates are widened to f64.
pub fn read_velodyne_bin(bytes: &[u8]) -> Result<PointCloud, KittiError> {
    if bytes.len() % 16 != 0 {
        return Err(KittiError::MalformedVelodyne(format!(
            "length {} is not a multiple of 16",
            bytes.len()
        )));
    }
    let n = bytes.len() / 16;
    let mut points = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(16).enumerate() {
        let mut v = [0.0f64; 4];
        for (j, word) in rec.chunks_exact(4).enumerate() {
            let f = f32::from_le_bytes([word[0], word[1], word[2], word[3]]);
            if !f.is_finite() {
                return Err(KittiError::MalformedVelodyne(format!(
                    "non-finite value in record {i}"
                )));
            }
            v[j] = f as f64;
        }
        points.push([v[0], v[1], v[2]]);
        intensities.push(v[3]);
    }
    Ok(PointCloud::with_intensities(points, intensities))
}

/// Inverse of [`read_velodyne_bin`]. Values are narrowed to f32; missing
/// intensities default to 0.
pub fn write_velodyne_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for (i, p) in cloud.points.iter().enumerate() {
        let intensity = cloud
            .intensities
            .as_ref()
            .map(|v| v[i])
            .unwrap_or(0.0);
        for value in [p[0], p[1], p[2], intensity] {
            out.extend_from_slice(&(value as f32).to_le_bytes());
        }
    }
    out
}
