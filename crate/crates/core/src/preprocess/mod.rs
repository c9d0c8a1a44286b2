//! Point-cloud and image conditioning: outlier removal, downsampling to a
//! fixed point count, centroid/max-norm normalization, bilinear resizing and
//! unit-range scaling. Everything is pure and seeded, so per-sample work can
//! run concurrently with seeds derived as `global_seed + sample_index`.

mod dbscan;

pub use dbscan::cluster_dbscan;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::kitti::{PointCloud, RgbImage, Sample};

/// Network-side point count.
pub const TARGET_POINTS: usize = 1024;
/// Network-side image edge length.
pub const IMAGE_SIZE: usize = 224;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("empty input cloud")]
    EmptyCloud,
    #[error("shape error: {0}")]
    Shape(String),
}

/// Fixed-shape normalized point matrix plus the pre-downsampling count.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedPoints {
    /// `[n, 3]`, centroid at the origin, max row norm 1 (or all zeros).
    pub coords: Tensor,
    pub source_count: usize,
}

/// `[224, 224, 3]` image tensor with every element in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedImage {
    pub data: Tensor,
}

/// Drop points whose distance to the cloud centroid exceeds
/// `mean(d) + 2 * std(d)` (population std). Order is preserved.
pub fn remove_statistical_outliers(cloud: &PointCloud) -> Result<PointCloud, PreprocessError> {
    if cloud.is_empty() {
        return Err(PreprocessError::EmptyCloud);
    }
    let c = cloud.centroid();
    let dists: Vec<f64> = cloud
        .points
        .iter()
        .map(|p| {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let dz = p[2] - c[2];
            (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .collect();
    let n = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / n;
    let var = dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let threshold = mean + 2.0 * var.sqrt();

    let mut points = Vec::new();
    let mut intensities = cloud.intensities.as_ref().map(|_| Vec::new());
    for (i, (&p, &d)) in cloud.points.iter().zip(&dists).enumerate() {
        if d <= threshold {
            points.push(p);
            if let (Some(out), Some(src)) = (intensities.as_mut(), cloud.intensities.as_ref()) {
                out.push(src[i]);
            }
        }
    }
    Ok(PointCloud {
        points,
        intensities,
    })
}

/// Resize to exactly `target` points: subsample without replacement when the
/// cloud is larger (selection kept in input order), identity when equal, and
/// pad with uniformly re-drawn duplicates when smaller.
pub fn downsample_points(
    cloud: &PointCloud,
    target: usize,
    seed: u64,
) -> Result<PointCloud, PreprocessError> {
    if cloud.is_empty() {
        return Err(PreprocessError::EmptyCloud);
    }
    assert!(target >= 1, "target must be >= 1");
    let n = cloud.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = if n > target {
        // Partial Fisher-Yates over the index set, then back to input order.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..target {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        let mut chosen = idx[..target].to_vec();
        chosen.sort_unstable();
        chosen
    } else if n == target {
        (0..n).collect()
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        for _ in n..target {
            idx.push(rng.gen_range(0..n));
        }
        idx
    };
    let points = indices.iter().map(|&i| cloud.points[i]).collect();
    let intensities = cloud
        .intensities
        .as_ref()
        .map(|v| indices.iter().map(|&i| v[i]).collect());
    Ok(PointCloud {
        points,
        intensities,
    })
}

/// Subtract the centroid, then divide by the maximum post-centering norm.
/// Degenerate clouds (max norm < 1e-12) come out all zeros.
pub fn normalize_points(cloud: &PointCloud) -> Result<ProcessedPoints, PreprocessError> {
    normalize_points_to(cloud, TARGET_POINTS)
}

/// [`normalize_points`] with an explicit expected point count (used by the
/// width-scaled test models).
pub fn normalize_points_to(
    cloud: &PointCloud,
    expected: usize,
) -> Result<ProcessedPoints, PreprocessError> {
    if cloud.len() != expected {
        return Err(PreprocessError::Shape(format!(
            "expected {expected} points, got {}",
            cloud.len()
        )));
    }
    let c = cloud.centroid();
    let mut coords = Vec::with_capacity(cloud.len() * 3);
    let mut max_norm = 0.0f64;
    for p in &cloud.points {
        let v = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        max_norm = max_norm.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        coords.extend_from_slice(&v);
    }
    if max_norm >= 1e-12 {
        for v in coords.iter_mut() {
            *v /= max_norm;
        }
    } else {
        coords.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(ProcessedPoints {
        coords: Tensor::new(vec![cloud.len(), 3], coords),
        source_count: cloud.len(),
    })
}

/// Bilinear resize with pixel-center alignment: the source coordinate for
/// output index `i` is `(i + 0.5) * scale - 0.5`, clamped to the borders.
/// Returns an `[out_h, out_w, 3]` f64 tensor of raw byte values.
pub fn resize_bilinear(
    image: &RgbImage,
    out_w: usize,
    out_h: usize,
) -> Result<Tensor, PreprocessError> {
    if image.width == 0 || image.height == 0 || out_w == 0 || out_h == 0 {
        return Err(PreprocessError::Shape(format!(
            "cannot resize {}x{} to {}x{}",
            image.width, image.height, out_w, out_h
        )));
    }
    let scale_x = image.width as f64 / out_w as f64;
    let scale_y = image.height as f64 / out_h as f64;
    let mut data = vec![0.0f64; out_h * out_w * 3];
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (image.height - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(image.height - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (image.width - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(image.width - 1);
            let fx = sx - x0 as f64;
            let p00 = image.get(x0, y0);
            let p10 = image.get(x1, y0);
            let p01 = image.get(x0, y1);
            let p11 = image.get(x1, y1);
            let out = &mut data[(oy * out_w + ox) * 3..(oy * out_w + ox) * 3 + 3];
            for ch in 0..3 {
                let top = p00[ch] as f64 * (1.0 - fx) + p10[ch] as f64 * fx;
                let bottom = p01[ch] as f64 * (1.0 - fx) + p11[ch] as f64 * fx;
                out[ch] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    Ok(Tensor::new(vec![out_h, out_w, 3], data))
}

/// Min-max scale the whole tensor to `[0, 1]`; constant input maps to zeros.
pub fn scale_unit_range(image: &Tensor) -> ProcessedImage {
    let values = image.values();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let data: Vec<f64> = if span > 0.0 {
        values.iter().map(|&v| (v - lo) / span).collect()
    } else {
        vec![0.0; values.len()]
    };
    ProcessedImage {
        data: Tensor::new(image.shape().to_vec(), data),
    }
}

/// Full per-sample chain: outliers -> downsample(1024, seed) -> normalize on
/// the points, resize(224) -> unit scale on the image.
pub fn preprocess_sample(
    sample: &Sample,
    seed: u64,
) -> Result<(ProcessedPoints, ProcessedImage), PreprocessError> {
    preprocess_sample_to(sample, seed, TARGET_POINTS, IMAGE_SIZE)
}

/// [`preprocess_sample`] with explicit target sizes (width-scaled models).
pub fn preprocess_sample_to(
    sample: &Sample,
    seed: u64,
    target_points: usize,
    image_size: usize,
) -> Result<(ProcessedPoints, ProcessedImage), PreprocessError> {
    let filtered = remove_statistical_outliers(&sample.points)?;
    let source_count = sample.points.len();
    let down = downsample_points(&filtered, target_points, seed)?;
    let mut points = normalize_points_to(&down, target_points)?;
    points.source_count = source_count;
    let resized = resize_bilinear(&sample.image, image_size, image_size)?;
    Ok((points, scale_unit_range(&resized)))
}
