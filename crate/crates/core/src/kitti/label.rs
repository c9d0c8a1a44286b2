//! KITTI label files: one object per line, 15 whitespace-separated fields
//! `type truncated occluded alpha left top right bottom h w l x y z ry`.

use super::{class_id_for_name, KittiError, ObjectLabel};

/// Parse a full label file; empty lines are skipped.
pub fn parse_label_file(text: &str) -> Result<Vec<ObjectLabel>, KittiError> {
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        labels.push(parse_label_line(line, idx + 1)?);
    }
    Ok(labels)
}

fn parse_label_line(line: &str, line_no: usize) -> Result<ObjectLabel, KittiError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 15 {
        return Err(KittiError::LabelParse {
            line: line_no,
            msg: format!("expected 15 fields, got {}", fields.len()),
        });
    }
    let num = |i: usize| -> Result<f64, KittiError> {
        fields[i].parse::<f64>().map_err(|_| KittiError::LabelParse {
            line: line_no,
            msg: format!("field {} ('{}') is not a number", i + 1, fields[i]),
        })
    };
    let raw_name = fields[0];
    let class_id = class_id_for_name(raw_name);
    let label = ObjectLabel {
        class_name: crate::CLASS_NAMES[class_id].to_string(),
        class_id,
        truncation: num(1)?,
        occlusion: num(2)? as i32,
        alpha: num(3)?,
        bbox2d: [num(4)?, num(5)?, num(6)?, num(7)?],
        dims: [num(8)?, num(9)?, num(10)?],
        location: [num(11)?, num(12)?, num(13)?],
        rotation_y: num(14)?,
    };
    if !label.is_dont_care() {
        let [l, t, r, b] = label.bbox2d;
        if r < l || b < t {
            return Err(KittiError::LabelParse {
                line: line_no,
                msg: format!("inverted bbox ({l}, {t}, {r}, {b})"),
            });
        }
    }
    Ok(label)
}

/// Serialize labels back to the 15-field layout. Numbers use Rust's shortest
/// round-trip float formatting, so `parse_label_file` reproduces them exactly.
pub fn format_label_file(labels: &[ObjectLabel]) -> String {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}\n",
            l.class_name,
            l.truncation,
            l.occlusion,
            l.alpha,
            l.bbox2d[0],
            l.bbox2d[1],
            l.bbox2d[2],
            l.bbox2d[3],
            l.dims[0],
            l.dims[1],
            l.dims[2],
            l.location[0],
            l.location[1],
            l.location[2],
            l.rotation_y
        ));
    }
    out
}
