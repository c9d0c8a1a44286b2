//! Frame-directory traversal: pair velodyne/image/label(/calib) files by
//! their shared frame-id stem and extract every labeled object.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::{
    extract_object_sample, load_image, parse_calib_file, parse_label_file, read_velodyne_bin,
    CalibData, ImageFormat, KittiError, Sample,
};

/// Result of a dataset build: samples in deterministic order plus bookkeeping.
#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub samples: Vec<Sample>,
    /// Per-class sample counts, indexed by class id.
    pub histogram: [usize; 4],
    /// One entry per skipped empty-object label.
    pub warnings: Vec<String>,
}

/// Walk the dataset directories and extract object samples.
///
/// Frames are visited in lexicographic frame-id order and labels in file
/// order, so two runs over the same tree produce identical sequences. Labels
/// whose 3D crop is empty are skipped with a warning. `calib_dir = None`
/// uses the identity transform (label locations already in the velodyne
/// frame). `limit = Some(n)` stops after n samples; `Some(0)` is empty.
pub fn build_dataset(
    velodyne_dir: &Path,
    image_dir: &Path,
    label_dir: &Path,
    calib_dir: Option<&Path>,
    limit: Option<usize>,
) -> Result<DatasetBuild, KittiError> {
    let mut frames = BTreeSet::new();
    for entry in std::fs::read_dir(label_dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.extension().map(|e| e == "txt").unwrap_or(false) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                frames.insert(stem.to_string());
            }
        }
    }

    let mut build = DatasetBuild {
        samples: Vec::new(),
        histogram: [0; 4],
        warnings: Vec::new(),
    };
    if limit == Some(0) {
        return Ok(build);
    }
    'frames: for frame in &frames {
        let velo_path = velodyne_dir.join(format!("{frame}.bin"));
        let label_path = label_dir.join(format!("{frame}.txt"));
        let image_path = find_image(image_dir, frame).ok_or_else(|| KittiError::Ingestion {
            frame: frame.clone(),
            msg: format!("no .ppm or .png image in {}", image_dir.display()),
        })?;
        if !velo_path.exists() {
            return Err(KittiError::Ingestion {
                frame: frame.clone(),
                msg: format!("missing {}", velo_path.display()),
            });
        }

        let cloud = read_velodyne_bin(&std::fs::read(&velo_path)?)?;
        let format = image_path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(ImageFormat::from_extension)
            .expect("find_image only returns known extensions");
        let image = load_image(&std::fs::read(&image_path)?, format)?;
        let labels = parse_label_file(&std::fs::read_to_string(&label_path)?)?;
        let calib = match calib_dir {
            Some(dir) => {
                let calib_path = dir.join(format!("{frame}.txt"));
                if !calib_path.exists() {
                    return Err(KittiError::Ingestion {
                        frame: frame.clone(),
                        msg: format!("missing {}", calib_path.display()),
                    });
                }
                parse_calib_file(&std::fs::read_to_string(&calib_path)?)?
            }
            None => CalibData::identity(),
        };

        for (label_idx, label) in labels.iter().enumerate() {
            if limit.is_some_and(|n| build.samples.len() >= n) {
                break 'frames;
            }
            match extract_object_sample(&cloud, &image, label, &calib) {
                Ok(sample) => {
                    build.histogram[sample.class_id] += 1;
                    build.samples.push(sample);
                }
                Err(KittiError::EmptyObject(class)) => {
                    build.warnings.push(format!(
                        "frame {frame} label {label_idx} ({class}): empty object crop, skipped"
                    ));
                }
                Err(e) => {
                    return Err(KittiError::Ingestion {
                        frame: frame.clone(),
                        msg: e.to_string(),
                    })
                }
            }
        }
        if limit.is_some_and(|n| build.samples.len() >= n) {
            break;
        }
    }
    Ok(build)
}

fn find_image(dir: &Path, frame: &str) -> Option<PathBuf> {
    for ext in ["ppm", "png"] {
        let p = dir.join(format!("{frame}.{ext}"));
        if p.exists() {
            return Some(p);
        }
    }
    None
}
