//! MCT1 / MCTC tensor files.
//!
//! Layout: 4-byte magic, then `d`, `m`, `n` as little-endian `u32`, then the
//! payload of little-endian `f64`s, channel-major and row-major within a
//! channel. MCTC stores `(re, im)` pairs.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{MultiChannelSample, RealGrid, SpectralGrid};
use crate::error::{Error, Result};

pub const MAGIC_REAL: &[u8; 4] = b"MCT1";
pub const MAGIC_SPECTRAL: &[u8; 4] = b"MCTC";
pub const HEADER_LEN: usize = 16;

struct Header {
    d: usize,
    m: usize,
    n: usize,
}

fn encode_header(magic: &[u8; 4], d: usize, m: usize, n: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(magic);
    for v in [d, m, n] {
        let v = u32::try_from(v)
            .map_err(|_| Error::Shape(format!("dimension {v} does not fit in u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn decode_header(bytes: &[u8], magic: &[u8; 4], scalars_per_value: usize) -> Result<Header> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::format(
            0,
            format!("expected magic {:?}", String::from_utf8_lossy(magic)),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let field = |k: usize| {
        let at = 4 + 4 * k;
        u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
    };
    let (d, m, n) = (field(0), field(1), field(2));
    for (k, v) in [d, m, n].into_iter().enumerate() {
        if v == 0 {
            return Err(Error::format(4 + 4 * k as u64, "dimension must be positive"));
        }
    }
    let payload = d
        .checked_mul(m)
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(8 * scalars_per_value))
        .ok_or_else(|| Error::format(4, "d*m*n overflows"))?;
    let expected = HEADER_LEN
        .checked_add(payload)
        .ok_or_else(|| Error::format(4, "d*m*n overflows"))?;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected as u64, "trailing bytes after payload"));
    }
    Ok(Header { d, m, n })
}

fn read_f64s(bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let at = HEADER_LEN + 8 * k;
        let v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(at as u64, "non-finite value"));
        }
        out.push(v);
    }
    Ok(out)
}

/// Serialize a sample to MCT1 bytes.
pub fn encode_sample(sample: &MultiChannelSample) -> Result<Vec<u8>> {
    let (m, n) = sample.shape();
    let mut out = encode_header(MAGIC_REAL, sample.depth(), m, n)?;
    out.reserve(sample.depth() * m * n * 8);
    for ch in sample.channels() {
        for v in ch.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_sample(bytes: &[u8]) -> Result<MultiChannelSample> {
    let Header { d, m, n } = decode_header(bytes, MAGIC_REAL, 1)?;
    let values = read_f64s(bytes, d * m * n)?;
    let channels = values
        .chunks_exact(m * n)
        .map(|c| RealGrid::new(m, n, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    MultiChannelSample::new(channels)
}

pub fn encode_spectral(channels: &[SpectralGrid]) -> Result<Vec<u8>> {
    let first = channels
        .first()
        .ok_or_else(|| Error::Shape("no channels to write".into()))?;
    let (m, n) = first.shape();
    if channels.iter().any(|c| c.shape() != (m, n)) {
        return Err(Error::Shape("spectral channels differ in shape".into()));
    }
    let mut out = encode_header(MAGIC_SPECTRAL, channels.len(), m, n)?;
    for ch in channels {
        for v in ch.as_slice() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_spectral(bytes: &[u8]) -> Result<Vec<SpectralGrid>> {
    let Header { d, m, n } = decode_header(bytes, MAGIC_SPECTRAL, 2)?;
    let values = read_f64s(bytes, 2 * d * m * n)?;
    values
        .chunks_exact(2 * m * n)
        .map(|c| {
            let data = c
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect();
            SpectralGrid::new(m, n, data)
        })
        .collect()
}

pub fn write_sample_file(sample: &MultiChannelSample, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_sample(sample)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_sample_file(path: impl AsRef<Path>) -> Result<MultiChannelSample> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sample(&bytes)
}

pub fn write_spectral_file(channels: &[SpectralGrid], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_spectral(channels)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_spectral_file(path: impl AsRef<Path>) -> Result<Vec<SpectralGrid>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_spectral(&bytes)
}
