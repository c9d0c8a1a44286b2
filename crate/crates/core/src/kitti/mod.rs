//! KITTI-format ingestion: velodyne binary scans, label and calibration text
//! files, RGB rasters, and per-object sample extraction.
//!
//! File formats handled here:
//! - velodyne `.bin`: packed little-endian f32 `(x, y, z, intensity)` records
//! - `label_2` text: 15 whitespace-separated fields per object line
//! - calib text: `<key>: v1 v2 ...` lines (`Tr_velo_to_cam`, `R0_rect`)
//! - images: PPM P6 (self-contained decoder) and PNG via a pluggable decoder
//!   registered at startup

mod calib;
mod dataset;
mod extract;
mod image;
mod label;
mod velodyne;

pub use calib::{format_calib_file, parse_calib_file};
pub use dataset::{build_dataset, DatasetBuild};
pub use extract::{box_center_camera, camera_to_velodyne, extract_object_sample, project_nominal};
pub use image::{encode_ppm, load_image, register_png_decoder, ImageFormat};
pub use label::{format_label_file, parse_label_file};
pub use velodyne::{read_velodyne_bin, write_velodyne_bin};

use thiserror::Error;

/// Errors produced by the ingestion layer.
#[derive(Debug, Error)]
pub enum KittiError {
    #[error("malformed velodyne file: {0}")]
    MalformedVelodyne(String),
    #[error("label parse error at line {line}: {msg}")]
    LabelParse { line: usize, msg: String },
    #[error("calib parse error: {0}")]
    CalibParse(String),
    #[error("image decode error: {0}")]
    ImageDecode(String),
    #[error("no PNG decoder registered (call register_png_decoder at startup)")]
    NoPngDecoder,
    #[error("object crop is empty for label '{0}'")]
    EmptyObject(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("ingestion error for frame '{frame}': {msg}")]
    Ingestion { frame: String, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A LiDAR scan or object crop in the velodyne sensor frame, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    /// Reflectance in [0,1], same length as `points` when present.
    pub intensities: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        PointCloud {
            points,
            intensities: None,
        }
    }

    pub fn with_intensities(points: Vec<[f64; 3]>, intensities: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), intensities.len());
        PointCloud {
            points,
            intensities: Some(intensities),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean of all points; `[0,0,0]` for an empty cloud.
    pub fn centroid(&self) -> [f64; 3] {
        if self.points.is_empty() {
            return [0.0; 3];
        }
        let mut c = [0.0; 3];
        for p in &self.points {
            c[0] += p[0];
            c[1] += p[1];
            c[2] += p[2];
        }
        let n = self.points.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }
}

/// One object annotation from a KITTI label file.
///
/// `class_name` is already folded into the 4-class universe: anything that is
/// not Car/Pedestrian/Cyclist maps to DontCare.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLabel {
    pub class_name: String,
    pub class_id: usize,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// (left, top, right, bottom) in image pixels.
    pub bbox2d: [f64; 4],
    /// (height, width, length) in meters.
    pub dims: [f64; 3],
    /// Bottom-center of the 3D box in the camera frame, meters.
    pub location: [f64; 3],
    pub rotation_y: f64,
}

impl ObjectLabel {
    pub fn is_dont_care(&self) -> bool {
        self.class_id == crate::DONT_CARE
    }
}

/// Calibration: velodyne -> camera transform plus the rectifying rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibData {
    /// 3x4 row-major `[R|t]` mapping velodyne to unrectified camera coords.
    pub tr_velo_to_cam: [[f64; 4]; 3],
    /// 3x3 row-major rectifying rotation.
    pub r0_rect: [[f64; 3]; 3],
}

impl CalibData {
    /// Identity transform: treats label locations as already being in the
    /// velodyne frame. Used for synthetic fixtures and `--no-calib` runs.
    pub fn identity() -> Self {
        CalibData {
            tr_velo_to_cam: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            r0_rect: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }
}

/// 8-bit RGB raster, row-major, no padding.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `width * height * 3` bytes, RGB interleaved.
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), width * height * 3);
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copy of the sub-rectangle `[x0, x1) x [y0, y1)`.
    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> RgbImage {
        debug_assert!(x1 <= self.width && y1 <= self.height && x0 < x1 && y0 < y1);
        let (w, h) = (x1 - x0, y1 - y0);
        let mut pixels = Vec::with_capacity(w * h * 3);
        for y in y0..y1 {
            let row = &self.pixels[(y * self.width + x0) * 3..(y * self.width + x1) * 3];
            pixels.extend_from_slice(row);
        }
        RgbImage {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// One labeled object instance ready for preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Object crop of the scan, velodyne frame.
    pub points: PointCloud,
    /// 2D-bbox crop of the camera image.
    pub image: RgbImage,
    /// 0=Car, 1=Pedestrian, 2=Cyclist, 3=DontCare.
    pub class_id: usize,
    /// Euclidean norm of the object-box center in the velodyne frame.
    pub distance_m: f64,
}

/// Map a KITTI class name onto the 4-class universe.
///
/// Van, Truck, Misc, Tram, Person_sitting and anything else unknown fold into
/// DontCare rather than being dropped.
pub fn class_id_for_name(name: &str) -> usize {
    match name {
        "Car" => 0,
        "Pedestrian" => 1,
        "Cyclist" => 2,
        _ => crate::DONT_CARE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_mapping_folds_unknown_names_into_dont_care() {
        assert_eq!(class_id_for_name("Car"), 0);
        assert_eq!(class_id_for_name("Pedestrian"), 1);
        assert_eq!(class_id_for_name("Cyclist"), 2);
        assert_eq!(class_id_for_name("DontCare"), 3);
        for other in ["Van", "Truck", "Misc", "Tram", "Person_sitting"] {
            assert_eq!(class_id_for_name(other), 3, "{other}");
        }
    }

    #[test]
    fn image_crop_extracts_sub_rectangle() {
        let mut img = RgbImage::filled(4, 3, [0, 0, 0]);
        img.set(2, 1, [9, 8, 7]);
        let crop = img.crop(2, 1, 4, 3);
        assert_eq!(crop.width, 2);
        assert_eq!(crop.height, 2);
        assert_eq!(crop.get(0, 0), [9, 8, 7]);
    }

    #[test]
    fn centroid_of_empty_cloud_is_origin() {
        assert_eq!(PointCloud::new(vec![]).centroid(), [0.0; 3]);
    }
}
