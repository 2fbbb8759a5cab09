//! Binary PGM (`P5`) frames, normalized to `[0, 1]`.

use std::fs;
use std::path::Path;

use super::RealGrid;
use crate::error::{Error, Result};

/// Parse a binary PGM and scale each pixel by `1 / maxval`.
pub fn decode_pgm(bytes: &[u8]) -> Result<RealGrid> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format(0, "not a binary PGM (magic P5)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments between header tokens
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
            return Err(Error::format(pos as u64, "expected header integer"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start as u64, "header integer out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format(pos as u64, "image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(pos as u64, format!("invalid maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(pos as u64, "missing raster separator"));
    }
    pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    if bytes.len() < pos + need {
        return Err(Error::format(bytes.len() as u64, "truncated raster"));
    }
    let raster = &bytes[pos..pos + need];
    let scale = maxval as f64;
    let data = if bpp == 1 {
        raster.iter().map(|&p| p as f64 / scale).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    RealGrid::new(height, width, data)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<RealGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Write an 8-bit PGM, clamping values to `[0, 1]`.
pub fn write_pgm(frame: &RealGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", frame.cols(), frame.rows()).into_bytes();
    out.extend(
        frame
            .as_slice()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(header: &str, raster: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(raster);
        v
    }

    #[test]
    fn eight_bit_values_normalized() {
        let g = decode_pgm(&pgm("P5\n2 2\n255\n", &[0, 255, 128, 64])).unwrap();
        assert_eq!(g.shape(), (2, 2));
        assert_eq!(g[(0, 0)], 0.0);
        assert_eq!(g[(0, 1)], 1.0);
        assert_eq!(g[(1, 0)], 128.0 / 255.0);
        assert_eq!(g[(1, 1)], 64.0 / 255.0);
    }

    #[test]
    fn all_zero_image() {
        let g = decode_pgm(&pgm("P5 3 2 255\n", &[0; 6])).unwrap();
        assert_eq!(g.shape(), (2, 3));
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sixteen_bit_full_scale() {
        let g = decode_pgm(&pgm("P5\n# comment\n2 1\n65535\n", &[0xff, 0xff, 0x80, 0x00])).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], 32768.0 / 65535.0);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(Error::Format { offset: 0, .. })));
        assert!(decode_pgm(&pgm("P5\n1 1\n0\n", &[0])).is_err());
        assert!(decode_pgm(&pgm("P5\n2 2\n255\n", &[1, 2, 3])).is_err());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let g = RealGrid::from_fn(3, 4, |i, j| ((i * 4 + j) as f64) / 11.0);
        write_pgm(&g, &path).unwrap();
        let back = read_pgm(&path).unwrap();
        assert!(back.max_abs_diff(&g).unwrap() <= 0.5 / 255.0 + 1e-12);
        assert!(back.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
