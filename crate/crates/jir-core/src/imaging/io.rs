//! JIR binary format plus PPM/PGM import and export.
//!
//! JIR layout (little-endian): magic `JIRI`, version u16 = 1, height u32,
//! width u32, channels u32, reserved u32 = 0, then `h*w*c` 32-bit IEEE-754
//! intensities, row-major, channel-interleaved. Total size is 22 header
//! bytes + 4 bytes per element. Round-trips are byte-identical.

use std::fs;
use std::path::Path;

use super::ImageGrid;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"JIRI";
const VERSION: u16 = 1;

/// Read a JIR, PPM (P6), or PGM (P5) file, dispatching on the magic bytes.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(MAGIC) {
        decode_jir(&bytes)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        decode_pnm(&bytes)
    } else {
        Err(Error::format(format!(
            "unrecognized magic in {}",
            path.as_ref().display()
        )))
    }
}

/// Write an image. `.ppm` and `.pgm` extensions select 8-bit PNM output
/// (value * 255, rounded); anything else writes JIR.
pub fn write_image(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let bytes = match ext.as_deref() {
        Some("ppm") => encode_pnm(img, true)?,
        Some("pgm") => encode_pnm(img, false)?,
        _ => encode_jir(img)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn encode_jir(img: &ImageGrid) -> Result<Vec<u8>> {
    // Re-validate: a grid built by hand could violate invariants.
    let checked = ImageGrid::new(
        img.height(),
        img.width(),
        img.channels(),
        img.data().to_vec(),
    )?;
    let mut out = Vec::with_capacity(22 + 4 * checked.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(checked.height() as u32).to_le_bytes());
    out.extend_from_slice(&(checked.width() as u32).to_le_bytes());
    out.extend_from_slice(&(checked.channels() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in checked.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub(crate) fn decode_jir(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.len() < 22 {
        return Err(Error::format("JIR header truncated"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format("bad JIR magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format(format!("unsupported JIR version {version}")));
    }
    let word = |off: usize| u32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]);
    let height = word(6) as usize;
    let width = word(10) as usize;
    let channels = word(14) as usize;
    let reserved = word(18);
    if reserved != 0 {
        return Err(Error::format("JIR reserved field must be 0"));
    }
    let n = height
        .checked_mul(width)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| Error::format("JIR dimensions overflow"))?;
    if bytes.len() != 22 + 4 * n {
        return Err(Error::format(format!(
            "JIR payload size {} != expected {}",
            bytes.len() - 22,
            4 * n
        )));
    }
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let off = 22 + 4 * i;
        let v = f32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]);
        if !(0.0..=1.0).contains(&f64::from(v)) {
            return Err(Error::validation(format!(
                "JIR intensity {v} outside [0,1] at element {i}"
            )));
        }
        data.push(v);
    }
    ImageGrid::new(height, width, channels, data)
}

fn encode_pnm(img: &ImageGrid, color: bool) -> Result<Vec<u8>> {
    let want = if color { 3 } else { 1 };
    if img.channels() != want {
        return Err(Error::validation(format!(
            "{} output needs {} channels, image has {}",
            if color { "PPM" } else { "PGM" },
            want,
            img.channels()
        )));
    }
    let mut out = format!(
        "{}\n{} {}\n255\n",
        if color { "P6" } else { "P5" },
        img.width(),
        img.height()
    )
    .into_bytes();
    for v in img.data() {
        out.push((f64::from(*v) * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    Ok(out)
}

fn decode_pnm(bytes: &[u8]) -> Result<ImageGrid> {
    let color = match &bytes[0..2] {
        b"P6" => true,
        b"P5" => false,
        _ => return Err(Error::format("bad PNM magic")),
    };
    // Header: three whitespace-separated integers after the magic, with
    // '#' comments allowed. Payload starts after the single whitespace byte
    // following maxval.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("PNM header truncated"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::format("PNM header not ascii"))?
            .parse()
            .map_err(|_| Error::format("PNM header field not an integer"))?;
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(Error::format(format!("PNM maxval must be 255, got {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let channels = if color { 3 } else { 1 };
    let n = width * height * channels;
    if bytes.len() < pos + n {
        return Err(Error::format("PNM payload truncated"));
    }
    let data = bytes[pos..pos + n]
        .iter()
        .map(|&b| f32::from(b) / 255.0)
        .collect();
    ImageGrid::new(height, width, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::residual_rmse;
    use tempfile::tempdir;

    #[test]
    fn jir_payload_order() {
        let img = ImageGrid::new(2, 2, 1, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let bytes = encode_jir(&img).unwrap();
        let back = decode_jir(&bytes).unwrap();
        assert_eq!(back.data(), &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(back.height(), 2);
        assert_eq!(back.width(), 2);
    }

    #[test]
    fn jir_single_pixel_is_26_bytes() {
        let img = ImageGrid::new(1, 1, 1, vec![0.5]).unwrap();
        let bytes = encode_jir(&img).unwrap();
        assert_eq!(bytes.len(), 26);
    }

    #[test]
    fn jir_roundtrip_byte_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.jir");
        let img = ImageGrid::new(3, 2, 3, (0..18).map(|i| i as f32 / 17.0).collect()).unwrap();
        write_image(&img, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = read_image(&path).unwrap();
        assert_eq!(back, img);
        let path2 = dir.path().join("img2.jir");
        write_image(&back, &path2).unwrap();
        assert_eq!(first, std::fs::read(&path2).unwrap());
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jir");
        std::fs::write(&path, b"XXXX0000000000000000000000").unwrap();
        match read_image(&path) {
            Err(crate::Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_payload_is_validation_error() {
        let img = ImageGrid::new(1, 1, 1, vec![0.5]).unwrap();
        let mut bytes = encode_jir(&img).unwrap();
        bytes[22..26].copy_from_slice(&2.0f32.to_le_bytes());
        match decode_jir(&bytes) {
            Err(crate::Error::Validation(_)) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn two_channel_write_rejected() {
        // Bypass the constructor to fabricate an invalid grid.
        let img = ImageGrid {
            height: 1,
            width: 1,
            channels: 2,
            data: vec![0.1, 0.2],
        };
        assert!(encode_jir(&img).is_err());
    }

    #[test]
    fn ppm_roundtrip_within_quantization() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        let img = ImageGrid::from_fn(5, 4, 3, |y, x, c| {
            (y as f64 * 0.13 + x as f64 * 0.07 + c as f64 * 0.21).fract()
        })
        .unwrap();
        write_image(&img, &path).unwrap();
        let back = read_image(&path).unwrap();
        assert!(residual_rmse(&img, &back).unwrap() < 1.0 / 255.0);
    }

    #[test]
    fn pgm_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = ImageGrid::from_fn(4, 6, 1, |y, x, _| ((y * 6 + x) as f64) / 23.0).unwrap();
        write_image(&img, &path).unwrap();
        let back = read_image(&path).unwrap();
        assert!(residual_rmse(&img, &back).unwrap() < 1.0 / 255.0);
        assert_eq!(back.channels(), 1);
    }
}
