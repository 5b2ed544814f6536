//! Binary operator archive.
//!
//! Layout (little endian): magic `CPMAP\0\0\0`, `u32` version, `u32` length
//! and UTF-8 bytes of the provenance tag, `u8` kind, `u32` basis size,
//! `u8` patch flag (then center x, y and radius), `u32` rows, `u32` cols,
//! the matrix row-major, the `(1+k²)^{1/4}` weights, `u8` subspace flag
//! (then its row-major entries, basis size × cols).

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde_json::json;

use super::{DiscreteBoundaryMap, MapKind, Patch};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CPMAP\0\0\0";
pub const ARCHIVE_VERSION: u32 = 1;

pub fn write_archive<W: Write>(map: &DiscreteBoundaryMap, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&ARCHIVE_VERSION.to_le_bytes())?;
    let tag = map.provenance.as_bytes();
    w.write_all(&(tag.len() as u32).to_le_bytes())?;
    w.write_all(tag)?;
    w.write_all(&[map.kind.code()])?;
    w.write_all(&(map.basis_size() as u32).to_le_bytes())?;
    match &map.patch {
        None => w.write_all(&[0])?,
        Some(p) => {
            w.write_all(&[1])?;
            for v in [p.center[0], p.center[1], p.radius] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    write_matrix(&mut w, &map.matrix)?;
    for v in &map.half_weights {
        w.write_all(&v.to_le_bytes())?;
    }
    match &map.subspace {
        None => w.write_all(&[0])?,
        Some(u) => {
            w.write_all(&[1])?;
            write_matrix(&mut w, u)?;
        }
    }
    Ok(())
}

fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    w.write_all(&(m.nrows() as u32).to_le_bytes())?;
    w.write_all(&(m.ncols() as u32).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r.read_exact(&mut b).map_err(|e| Error::Archive(format!("truncated archive: {e}")))?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn matrix(&mut self, max: usize) -> Result<DMatrix<f64>> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        if rows > max || cols > max {
            return Err(Error::Archive(format!("implausible matrix size {rows}x{cols}")));
        }
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }
}

pub fn read_archive<R: Read>(r: R) -> Result<DiscreteBoundaryMap> {
    let mut rd = Reader { r };
    if &rd.bytes::<8>()? != MAGIC {
        return Err(Error::Archive("bad magic".into()));
    }
    let version = rd.u32()?;
    if version != ARCHIVE_VERSION {
        return Err(Error::Archive(format!("version {version}, expected {ARCHIVE_VERSION}")));
    }
    let tag_len = rd.u32()? as usize;
    if tag_len > 1 << 16 {
        return Err(Error::Archive("implausible provenance length".into()));
    }
    let mut tag = vec![0u8; tag_len];
    rd.r.read_exact(&mut tag).map_err(|e| Error::Archive(format!("truncated archive: {e}")))?;
    let provenance = String::from_utf8(tag).map_err(|_| Error::Archive("provenance is not UTF-8".into()))?;
    let kind = MapKind::from_code(rd.u8()?).ok_or_else(|| Error::Archive("unknown map kind".into()))?;
    let k = rd.u32()? as usize;
    if k > 1 << 14 {
        return Err(Error::Archive("implausible basis size".into()));
    }
    let patch = match rd.u8()? {
        0 => None,
        1 => Some(Patch { center: [rd.f64()?, rd.f64()?], radius: rd.f64()? }),
        _ => return Err(Error::Archive("bad patch flag".into())),
    };
    let matrix = rd.matrix(k)?;
    let half_weights = (0..k).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?;
    let subspace = match rd.u8()? {
        0 => None,
        1 => Some(rd.matrix(k)?),
        _ => return Err(Error::Archive("bad subspace flag".into())),
    };
    if let Some(u) = &subspace {
        if u.nrows() != k || u.ncols() != matrix.nrows() {
            return Err(Error::Archive("subspace does not match the matrix".into()));
        }
    } else if matrix.nrows() != k {
        return Err(Error::Archive("matrix does not match the basis size".into()));
    }
    if rd.r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Archive("trailing bytes".into()));
    }
    Ok(DiscreteBoundaryMap { kind, patch, matrix, half_weights, subspace, provenance })
}

/// JSON description stored next to an archive.
pub fn sidecar_json(map: &DiscreteBoundaryMap) -> serde_json::Value {
    json!({
        "format": "crackprobe-operator",
        "version": ARCHIVE_VERSION,
        "kind": map.kind.as_str(),
        "basis_size": map.basis_size(),
        "rows": map.matrix.nrows(),
        "cols": map.matrix.ncols(),
        "patch": map.patch,
        "provenance": map.provenance,
        "selfadjoint_defect": super::selfadjoint_defect(map),
    })
}
