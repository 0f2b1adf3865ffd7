//! Image and homography file formats.
//!
//! Binary PGM (P5, 8 or 16 bit) is parsed here; PNG goes through the
//! `image` crate and is converted to luma.

use std::fs;
use std::path::Path;

use super::{GrayImage, Homography};
use crate::error::{Error, Result};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Loads a PGM (P5) or PNG file as a `[0, 255]` grayscale image.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(path, &bytes)
}

pub fn decode_image(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(path, bytes)
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(path, bytes)
    } else {
        Err(Error::Decode {
            path: path.to_path_buf(),
            offset: 0,
            reason: "unrecognized image signature (expected P5 PGM or PNG)".into(),
        })
    }
}

fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    let err = |offset: usize, reason: String| Error::Decode {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(err(start, format!("expected {name}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        fields[i] = text.parse().map_err(|e| err(start, format!("bad {name}: {e}")))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(err(pos, format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(err(pos, format!("maxval {maxval} outside 1..=65535")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(err(pos, "missing whitespace after header".into()));
    }
    pos += 1;
    let bpp = if maxval > 255 { 2 } else { 1 };
    let need = width * height * bpp;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(err(
            bytes.len(),
            format!("truncated raster: need {need} bytes, found {}", payload.len()),
        ));
    }
    let scale = 255.0 / maxval as f64;
    let data = if bpp == 1 {
        payload[..need].iter().map(|&v| v as f64 * scale).collect()
    } else {
        payload[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    };
    GrayImage::from_vec(width, height, data)
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    let dynimg = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        offset: 0,
        reason: e.to_string(),
    })?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    match dynimg {
        image::DynamicImage::ImageLuma8(buf) => {
            GrayImage::from_vec(w, h, buf.into_raw().into_iter().map(f64::from).collect())
        }
        image::DynamicImage::ImageLuma16(buf) => {
            GrayImage::from_vec(w, h, buf.into_raw().into_iter().map(|v| v as f64 / 257.0).collect())
        }
        image::DynamicImage::ImageRgb16(_) | image::DynamicImage::ImageRgba16(_) => {
            let rgb = dynimg.to_rgb16().into_raw();
            let data = rgb
                .chunks_exact(3)
                .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 257.0)
                .collect();
            GrayImage::from_vec(w, h, data)
        }
        other => GrayImage::from_rgb8(w, h, &other.to_rgb8().into_raw()),
    }
}

/// Writes an 8-bit binary PGM (values rounded and clamped).
pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_homography(path: impl AsRef<Path>) -> Result<Homography> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Homography::parse(&text)
}

pub fn write_homography(h: &Homography, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, h.to_string()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 50 + y) as f64).unwrap();
        write_pgm(&img, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn pgm_with_comment_and_16_bit() {
        let mut bytes = b"P5\n# made by hand\n2 1\n65535\n".to_vec();
        bytes.extend([0xff, 0xff, 0x00, 0x00]);
        let img = decode_image(Path::new("x.pgm"), &bytes).unwrap();
        assert_eq!(img.data(), &[255.0, 0.0]);
    }

    #[test]
    fn pgm_errors_name_offset() {
        let bytes = b"P5\n4 4\n255\n\x01\x02".to_vec();
        match decode_image(Path::new("t.pgm"), &bytes) {
            Err(Error::Decode { offset, reason, .. }) => {
                assert_eq!(offset, bytes.len() as u64);
                assert!(reason.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = b"P5\nx 4\n255\n".to_vec();
        assert!(matches!(
            decode_image(Path::new("t.pgm"), &bad),
            Err(Error::Decode { offset: 3, .. })
        ));
        assert!(matches!(
            decode_image(Path::new("t.bin"), b"GIF89a"),
            Err(Error::Decode { offset: 0, .. })
        ));
    }

    #[test]
    fn png_rgb_goes_to_luma() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let buf = image::RgbImage::from_raw(2, 1, vec![255, 0, 0, 0, 0, 255]).unwrap();
        buf.save(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert!((img.get(0, 0) - 0.299 * 255.0).abs() < 1e-9);
        assert!((img.get(1, 0) - 0.114 * 255.0).abs() < 1e-9);
    }

    #[test]
    fn homography_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.txt");
        fs::write(&p, "1 0 5\n0 1 0\n0 0 1\n").unwrap();
        assert_eq!(read_homography(&p).unwrap(), Homography::translation(5.0, 0.0));
    }
}
