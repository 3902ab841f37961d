//! Array files (`GLMCT-F64` text header followed by little-endian f64 data),
//! 8-bit PGM export and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

const MAGIC: &str = "GLMCT-F64";

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a partially written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

/// Serialises a rank-2 tensor with an optional geometry digest.
pub fn encode_array(data: &Tensor, geometry: Option<u64>) -> Result<Vec<u8>> {
    let [rows, cols] = *data.shape() else {
        return Err(Error::shape(format!("array files hold rank-2 data, got {:?}", data.shape())));
    };
    let geom = geometry.map_or_else(|| "none".to_string(), |d| format!("{d:016x}"));
    let mut out = format!("{MAGIC} rows={rows} cols={cols} geom={geom}\n").into_bytes();
    out.reserve(rows * cols * 8);
    for v in data.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Inverse of [`encode_array`]; returns the tensor and the geometry digest.
pub fn decode_array(bytes: &[u8]) -> std::result::Result<(Tensor, Option<u64>), String> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| "header is not UTF-8")?;
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(format!("bad magic, expected {MAGIC}"));
    }
    let mut field = |key: &str| -> std::result::Result<String, String> {
        let p = parts.next().ok_or(format!("missing `{key}`"))?;
        p.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or(format!("expected `{key}=`, found `{p}`"))
    };
    let rows: usize = field("rows")?.parse().map_err(|e| format!("rows: {e}"))?;
    let cols: usize = field("cols")?.parse().map_err(|e| format!("cols: {e}"))?;
    let geom = match field("geom")?.as_str() {
        "none" => None,
        hex => Some(u64::from_str_radix(hex, 16).map_err(|e| format!("geom: {e}"))?),
    };
    let body = &bytes[nl + 1..];
    if body.len() != rows * cols * 8 {
        return Err(format!("expected {} data bytes, found {}", rows * cols * 8, body.len()));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let t = Tensor::from_vec(&[rows, cols], data).map_err(|e| e.to_string())?;
    Ok((t, geom))
}

pub fn write_array(path: &Path, data: &Tensor, geometry: Option<u64>) -> Result<()> {
    atomic_write(path, &encode_array(data, geometry)?)
}

pub fn read_array(path: &Path) -> Result<(Tensor, Option<u64>)> {
    let bytes = fs::read(path)?;
    decode_array(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}

/// Min-max normalises a rank-2 tensor to `0..=255`. Constant images map to 0.
pub fn to_u8(image: &Tensor) -> Result<Vec<u8>> {
    if image.rank() != 2 {
        return Err(Error::shape(format!("expected an (h, w) image, got {:?}", image.shape())));
    }
    let (lo, hi) = image
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    Ok(image
        .data()
        .iter()
        .map(|&v| if range > 0.0 { ((v - lo) / range * 255.0).round() as u8 } else { 0 })
        .collect())
}

pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let pixels = to_u8(image)?;
    let (h, w) = (image.shape()[0], image.shape()[1]);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

pub fn write_pgm(path: &Path, image: &Tensor) -> Result<()> {
    atomic_write(path, &encode_pgm(image)?)
}
