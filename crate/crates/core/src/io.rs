//! Binary field dumps: 32-byte header plus little-endian f64 planes, with a JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};
use crate::extension::{ExtendedField, VerticalGrid};
use crate::field::ScalarField;
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 4] = b"SQGF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub box_length: f64,
    pub alpha: f64,
    pub time: f64,
    pub kind: String,
    pub planes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_levels: Option<Vec<f64>>,
}

/// Write bytes to a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.partial",
        path.extension().and_then(|e| e.to_str()).unwrap_or("tmp")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn encode_planes(n: usize, planes: &[&[f64]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * n * planes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(planes.len() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 16]);
    for p in planes {
        for v in p.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Returns (n, planes).
pub fn decode_planes(bytes: &[u8]) -> Result<(usize, Vec<Vec<f64>>)> {
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return Err(SqgError::Data("not an SQGF field file".into()));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    if word(4) != VERSION as usize {
        return Err(SqgError::Data(format!("unsupported version {}", word(4))));
    }
    let n = word(8);
    let planes = word(12).max(1);
    let expect = HEADER_LEN + 8 * n * n * planes;
    if bytes.len() != expect {
        return Err(SqgError::Data(format!("expected {expect} bytes, found {}", bytes.len())));
    }
    let vals: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((n, vals.chunks(n * n).map(|c| c.to_vec()).collect()))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_field(path: &Path, f: &ScalarField, kind: &str) -> Result<()> {
    let g = f.grid();
    write_atomic(path, &encode_planes(g.n, &[f.values()]))?;
    let side = Sidecar {
        n: g.n,
        box_length: g.box_length,
        alpha: g.alpha,
        time: f.time(),
        kind: kind.to_string(),
        planes: 1,
        y_levels: None,
    };
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(&side).unwrap().as_bytes())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path)?;
    let (n, mut planes) = decode_planes(&bytes)?;
    let side: Sidecar = match fs::read(sidecar_path(path)) {
        Ok(b) => serde_json::from_slice(&b).map_err(|e| SqgError::Data(e.to_string()))?,
        Err(e) => return Err(SqgError::Io(format!("missing sidecar: {e}"))),
    };
    if side.n != n {
        return Err(SqgError::Data("sidecar grid size disagrees with header".into()));
    }
    let grid = GridSpec::new(n, side.box_length, side.alpha)?;
    ScalarField::from_values(grid, planes.swap_remove(0), side.time)
}

/// One plane per vertical level; the sidecar carries the level heights.
pub fn write_extension(path: &Path, ext: &ExtendedField) -> Result<()> {
    let g = ext.base().grid();
    let planes: Vec<&[f64]> = ext.levels().iter().map(|l| l.values()).collect();
    write_atomic(path, &encode_planes(g.n, &planes))?;
    let side = Sidecar {
        n: g.n,
        box_length: g.box_length,
        alpha: g.alpha,
        time: ext.time(),
        kind: "extension".into(),
        planes: planes.len(),
        y_levels: Some(ext.vgrid().y_levels().to_vec()),
    };
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(&side).unwrap().as_bytes())
}

pub fn read_extension(path: &Path) -> Result<ExtendedField> {
    let (n, planes) = decode_planes(&fs::read(path)?)?;
    let side: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?).map_err(|e| SqgError::Data(e.to_string()))?;
    let y = side.y_levels.ok_or_else(|| SqgError::Data("sidecar lacks y_levels".into()))?;
    if side.n != n || y.len() != planes.len() {
        return Err(SqgError::Data("sidecar disagrees with header".into()));
    }
    let grid = GridSpec::new(n, side.box_length, side.alpha)?;
    let levels = planes
        .into_iter()
        .map(|p| ScalarField::from_values(grid, p, side.time))
        .collect::<Result<Vec<_>>>()?;
    ExtendedField::from_levels(VerticalGrid::from_levels(y, side.alpha)?, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(16, 3.0, 0.4).unwrap();
        let f = ScalarField::from_fn(g, 0.7, |x, y| x * y - 1.0).unwrap();
        let p = dir.path().join("theta.bin");
        write_field(&p, &f, "theta").unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[0..4], b"SQGF");
        assert_eq!(bytes.len(), 32 + 8 * 256);
        let back = read_field(&p).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.time(), 0.7);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_planes(b"nope").is_err());
        let mut b = encode_planes(8, &[&[0.0; 64]]);
        b.pop();
        assert!(decode_planes(&b).is_err());
    }
}
