//! Calibration files: `<key>: v1 v2 ...` lines. Only `Tr_velo_to_cam`
//! (12 numbers) and `R0_rect` (9 numbers) are consumed; key order is free.

use super::{CalibData, KittiError};

/// Parse a calib file. The rotation blocks must have determinant within
/// 1e-3 of +1; anything else is treated as a malformed file.
pub fn parse_calib_file(text: &str) -> Result<CalibData, KittiError> {
    let mut tr: Option<Vec<f64>> = None;
    let mut r0: Option<Vec<f64>> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim();
        if key != "Tr_velo_to_cam" && key != "R0_rect" {
            continue;
        }
        let values: Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse::<f64>).collect();
        let values =
            values.map_err(|e| KittiError::CalibParse(format!("bad number in {key}: {e}")))?;
        match key {
            "Tr_velo_to_cam" => {
                if values.len() != 12 {
                    return Err(KittiError::CalibParse(format!(
                        "Tr_velo_to_cam expects 12 numbers, got {}",
                        values.len()
                    )));
                }
                tr = Some(values);
            }
            _ => {
                if values.len() != 9 {
                    return Err(KittiError::CalibParse(format!(
                        "R0_rect expects 9 numbers, got {}",
                        values.len()
                    )));
                }
                r0 = Some(values);
            }
        }
    }
    let tr = tr.ok_or_else(|| KittiError::CalibParse("missing Tr_velo_to_cam".into()))?;
    let r0 = r0.ok_or_else(|| KittiError::CalibParse("missing R0_rect".into()))?;

    let mut tr_m = [[0.0; 4]; 3];
    for r in 0..3 {
        for c in 0..4 {
            tr_m[r][c] = tr[r * 4 + c];
        }
    }
    let mut r0_m = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            r0_m[r][c] = r0[r * 3 + c];
        }
    }

    let rot = [
        [tr_m[0][0], tr_m[0][1], tr_m[0][2]],
        [tr_m[1][0], tr_m[1][1], tr_m[1][2]],
        [tr_m[2][0], tr_m[2][1], tr_m[2][2]],
    ];
    for (name, m) in [("Tr_velo_to_cam rotation", rot), ("R0_rect", r0_m)] {
        let d = det3(&m);
        if (d - 1.0).abs() > 1e-3 {
            return Err(KittiError::CalibParse(format!(
                "{name} determinant {d} is not within 1e-3 of +1"
            )));
        }
    }
    Ok(CalibData {
        tr_velo_to_cam: tr_m,
        r0_rect: r0_m,
    })
}

/// Serialize calibration in the same `<key>: ...` layout.
pub fn format_calib_file(calib: &CalibData) -> String {
    let tr: Vec<String> = calib
        .tr_velo_to_cam
        .iter()
        .flatten()
        .map(|v| v.to_string())
        .collect();
    let r0: Vec<String> = calib.r0_rect.iter().flatten().map(|v| v.to_string()).collect();
    format!("Tr_velo_to_cam: {}\nR0_rect: {}\n", tr.join(" "), r0.join(" "))
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: &str = "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n";

    #[test]
    fn parses_identity_fixture() {
        let calib = parse_calib_file(IDENTITY).unwrap();
        assert_eq!(calib, CalibData::identity());
    }

    #[test]
    fn key_order_does_not_matter() {
        let swapped = "R0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";
        assert_eq!(
            parse_calib_file(swapped).unwrap(),
            parse_calib_file(IDENTITY).unwrap()
        );
    }

    #[test]
    fn translation_lands_in_fourth_column() {
        let text = "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 -0.27\nR0_rect: 1 0 0 0 1 0 0 0 1\n";
        let calib = parse_calib_file(text).unwrap();
        assert_eq!(calib.tr_velo_to_cam[0][3], 0.0);
        assert_eq!(calib.tr_velo_to_cam[1][3], 0.0);
        assert_eq!(calib.tr_velo_to_cam[2][3], -0.27);
    }

    #[test]
    fn missing_key_is_an_error() {
        assert!(parse_calib_file("R0_rect: 1 0 0 0 1 0 0 0 1\n").is_err());
        assert!(parse_calib_file("").is_err());
    }

    #[test]
    fn wrong_count_is_an_error() {
        let text = "Tr_velo_to_cam: 1 0 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n";
        assert!(parse_calib_file(text).is_err());
    }

    #[test]
    fn non_rotation_block_is_rejected() {
        let text = "Tr_velo_to_cam: 2 0 0 0 0 2 0 0 0 0 2 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n";
        assert!(parse_calib_file(text).is_err());
    }

    #[test]
    fn format_parse_round_trip() {
        let calib = parse_calib_file(IDENTITY).unwrap();
        assert_eq!(parse_calib_file(&format_calib_file(&calib)).unwrap(), calib);
    }

    #[test]
    fn ignores_unrelated_keys() {
        let text = format!("P0: 1 2 3\n{IDENTITY}comment without colon\n");
        assert!(parse_calib_file(&text).is_ok());
    }
}
