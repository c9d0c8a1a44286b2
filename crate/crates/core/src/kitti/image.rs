//! Raster decoding. PPM P6 (binary, maxval <= 255) is decoded here with no
//! dependencies; PNG is delegated to a decoder registered at startup so the
//! core crate stays codec-free.

use std::sync::OnceLock;

use super::{KittiError, RgbImage};

/// Supported input raster formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    PpmP6,
    Png,
}

impl ImageFormat {
    /// Guess from a file extension (case-insensitive).
    pub fn from_extension(ext: &str) -> Option<ImageFormat> {
        match ext.to_ascii_lowercase().as_str() {
            "ppm" => Some(ImageFormat::PpmP6),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

type PngDecoder = Box<dyn Fn(&[u8]) -> Result<RgbImage, String> + Send + Sync>;

static PNG_DECODER: OnceLock<PngDecoder> = OnceLock::new();

/// Install the PNG decoder used by [`load_image`]. The first registration
/// wins; later calls are ignored.
pub fn register_png_decoder<F>(decoder: F)
where
    F: Fn(&[u8]) -> Result<RgbImage, String> + Send + Sync + 'static,
{
    let _ = PNG_DECODER.set(Box::new(decoder));
}

/// Decode an image of the declared format into an 8-bit RGB raster.
pub fn load_image(bytes: &[u8], format: ImageFormat) -> Result<RgbImage, KittiError> {
    match format {
        ImageFormat::PpmP6 => decode_ppm_p6(bytes),
        ImageFormat::Png => match PNG_DECODER.get() {
            Some(decoder) => decoder(bytes).map_err(KittiError::ImageDecode),
            None => Err(KittiError::NoPngDecoder),
        },
    }
}

/// Encode as binary PPM P6 with maxval 255.
pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

fn decode_ppm_p6(bytes: &[u8]) -> Result<RgbImage, KittiError> {
    let mut cursor = 0usize;
    let magic = read_token(bytes, &mut cursor)
        .ok_or_else(|| KittiError::ImageDecode("truncated PPM header".into()))?;
    if magic != b"P6" {
        return Err(KittiError::ImageDecode(format!(
            "bad magic {:?}, expected P6",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut dims = [0usize; 3];
    for slot in dims.iter_mut() {
        let tok = read_token(bytes, &mut cursor)
            .ok_or_else(|| KittiError::ImageDecode("truncated PPM header".into()))?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| KittiError::ImageDecode("non-numeric PPM header field".into()))?;
    }
    let [width, height, maxval] = dims;
    if maxval > 255 {
        return Err(KittiError::ImageDecode(format!(
            "unsupported bit depth: maxval {maxval} > 255"
        )));
    }
    if maxval == 0 {
        return Err(KittiError::ImageDecode("maxval 0".into()));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err(KittiError::ImageDecode("missing payload separator".into()));
    }
    cursor += 1;
    let need = width * height * 3;
    let payload = bytes
        .get(cursor..cursor + need)
        .ok_or_else(|| KittiError::ImageDecode("truncated PPM payload".into()))?;
    Ok(RgbImage::new(width, height, payload.to_vec()))
}

/// Next whitespace-delimited token, skipping `#` comments.
fn read_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    if *cursor >= bytes.len() {
        return None;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    Some(&bytes[start..*cursor])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_hand_authored_two_pixel_ppm() {
        let mut bytes = b"P6 2 1 255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0]);
        let img = load_image(&bytes, ImageFormat::PpmP6).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        assert_eq!(img.get(0, 0), [255, 0, 0]);
        assert_eq!(img.get(1, 0), [0, 255, 0]);
    }

    #[test]
    fn decodes_single_black_pixel() {
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 0, 0]);
        let img = load_image(&bytes, ImageFormat::PpmP6).unwrap();
        assert_eq!(img.get(0, 0), [0, 0, 0]);
    }

    #[test]
    fn sixteen_bit_maxval_is_unsupported() {
        let bytes = b"P6 1 1 65535\n\x00\x00\x00\x00\x00\x00".to_vec();
        match load_image(&bytes, ImageFormat::PpmP6) {
            Err(KittiError::ImageDecode(msg)) => assert!(msg.contains("unsupported")),
            other => panic!("expected unsupported-depth error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(load_image(b"P5 1 1 255\n\x00", ImageFormat::PpmP6).is_err());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = b"P6 2 2 255\n\x00\x00\x00".to_vec();
        assert!(load_image(&bytes, ImageFormat::PpmP6).is_err());
    }

    #[test]
    fn comments_in_header_are_skipped() {
        let mut bytes = b"P6\n# made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let img = load_image(&bytes, ImageFormat::PpmP6).unwrap();
        assert_eq!(img.get(1, 0), [4, 5, 6]);
    }

    #[test]
    fn encode_decode_round_trip() {
        let img = RgbImage::new(3, 2, (0..18u8).collect());
        let back = load_image(&encode_ppm(&img), ImageFormat::PpmP6).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn png_without_decoder_reports_missing_hook() {
        // Registration is process-global, so this only checks the error when
        // nothing has been registered in this test binary.
        if PNG_DECODER.get().is_none() {
            assert!(matches!(
                load_image(&[0x89, b'P', b'N', b'G'], ImageFormat::Png),
                Err(KittiError::NoPngDecoder)
            ));
        }
    }

    #[test]
    fn extension_guessing() {
        assert_eq!(ImageFormat::from_extension("PPM"), Some(ImageFormat::PpmP6));
        assert_eq!(ImageFormat::from_extension("png"), Some(ImageFormat::Png));
        assert_eq!(ImageFormat::from_extension("jpg"), None);
    }
}
