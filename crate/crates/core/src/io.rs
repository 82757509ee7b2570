//! Binary snapshot and manifold files (little-endian) and small CSV helpers.
//!
//! Snapshot file: `"ESRM"`, `u32` version, `u32` n_vars, `u32` n_cells,
//! `u32` n_s, `f64` a, `f64` b, then the `N_h × n_s` data column-major, then
//! the `n_s` times.
//!
//! Manifold file: `"ESMF"`, `u32` version, `u32` kind (0 linear, 1 quadratic,
//! 2 rational), `u32` N_h, `u32` r, then the coefficient blocks:
//! linear `Φ, shift`; quadratic `Φ, W, shift`; rational `H², H¹, u_ref, L`.
//! Matrices are column-major; `H²` and `L` are one row-major `r × r` block per row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fom::SnapshotSet;
use crate::manifold::{
    n_quadratic_features, AnyManifold, LinearManifold, Manifold, QuadraticManifold,
    RationalQuadraticManifold,
};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"ESRM";
pub const MANIFOLD_MAGIC: &[u8; 4] = b"ESMF";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64s<W: Write>(w: &mut W, vs: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
}

fn expect_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = get_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(())
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

pub fn write_snapshots<W: Write>(mut w: W, s: &SnapshotSet) -> Result<()> {
    s.validate()?;
    w.write_all(SNAPSHOT_MAGIC)?;
    put_u32(&mut w, FORMAT_VERSION)?;
    put_u32(&mut w, to_u32(s.n_vars, "n_vars")?)?;
    put_u32(&mut w, to_u32(s.n_cells, "n_cells")?)?;
    put_u32(&mut w, to_u32(s.n_snapshots(), "n_s")?)?;
    put_f64s(&mut w, [s.domain.0, s.domain.1])?;
    put_f64s(&mut w, s.data.iter().copied())?;
    put_f64s(&mut w, s.times.iter().copied())?;
    Ok(w.flush()?)
}

pub fn read_snapshots<R: Read>(mut r: R) -> Result<SnapshotSet> {
    expect_header(&mut r, SNAPSHOT_MAGIC)?;
    let n_vars = get_u32(&mut r)? as usize;
    let n_cells = get_u32(&mut r)? as usize;
    let n_s = get_u32(&mut r)? as usize;
    let a = get_f64(&mut r)?;
    let b = get_f64(&mut r)?;
    let n_dof = n_vars
        .checked_mul(n_cells)
        .ok_or_else(|| Error::Format("snapshot dimensions overflow".into()))?;
    let data = get_f64s(&mut r, n_dof * n_s)?;
    let times = get_f64s(&mut r, n_s)?;
    expect_eof(&mut r)?;
    let s = SnapshotSet {
        data: DMatrix::from_vec(n_dof, n_s, data),
        times,
        n_vars,
        n_cells,
        domain: (a, b),
    };
    s.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(s)
}

pub fn save_snapshots(path: &Path, s: &SnapshotSet) -> Result<()> {
    write_snapshots(BufWriter::new(File::create(path)?), s)
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotSet> {
    read_snapshots(BufReader::new(File::open(path)?))
}

pub fn write_manifold<W: Write>(mut w: W, m: &AnyManifold) -> Result<()> {
    w.write_all(MANIFOLD_MAGIC)?;
    put_u32(&mut w, FORMAT_VERSION)?;
    let kind = match m {
        AnyManifold::Linear(_) => 0,
        AnyManifold::Quadratic(_) => 1,
        AnyManifold::Rational(_) => 2,
    };
    put_u32(&mut w, kind)?;
    put_u32(&mut w, to_u32(m.n_dof(), "N_h")?)?;
    put_u32(&mut w, to_u32(m.dim(), "r")?)?;
    match m {
        AnyManifold::Linear(l) => {
            put_f64s(&mut w, l.basis().iter().copied())?;
            put_f64s(&mut w, l.shift().iter().copied())?;
        }
        AnyManifold::Quadratic(q) => {
            put_f64s(&mut w, q.basis().iter().copied())?;
            put_f64s(&mut w, q.quadratic_coefficients().iter().copied())?;
            put_f64s(&mut w, q.shift().iter().copied())?;
        }
        AnyManifold::Rational(rq) => {
            put_f64s(&mut w, rq.h2().iter().copied())?;
            put_f64s(&mut w, rq.h1().iter().copied())?;
            put_f64s(&mut w, rq.u_ref().iter().copied())?;
            put_f64s(&mut w, rq.l().iter().copied())?;
        }
    }
    Ok(w.flush()?)
}

pub fn read_manifold<R: Read>(mut r: R) -> Result<AnyManifold> {
    expect_header(&mut r, MANIFOLD_MAGIC)?;
    let kind = get_u32(&mut r)?;
    let n = get_u32(&mut r)? as usize;
    let dim = get_u32(&mut r)? as usize;
    let mat = |r: &mut R, rows: usize, cols: usize| -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_vec(rows, cols, get_f64s(r, rows * cols)?))
    };
    let fmt = |e: Error| Error::Format(e.to_string());
    let m = match kind {
        0 => {
            let basis = mat(&mut r, n, dim)?;
            let shift = DVector::from_vec(get_f64s(&mut r, n)?);
            AnyManifold::Linear(LinearManifold::with_shift(basis, shift).map_err(fmt)?)
        }
        1 => {
            let basis = mat(&mut r, n, dim)?;
            let w = mat(&mut r, n, n_quadratic_features(dim))?;
            let shift = DVector::from_vec(get_f64s(&mut r, n)?);
            AnyManifold::Quadratic(QuadraticManifold::new(basis, w, shift).map_err(fmt)?)
        }
        2 => {
            let h2 = get_f64s(&mut r, n * dim * dim)?;
            let h1 = mat(&mut r, n, dim)?;
            let u_ref = DVector::from_vec(get_f64s(&mut r, n)?);
            let l = get_f64s(&mut r, n * dim * dim)?;
            AnyManifold::Rational(RationalQuadraticManifold::new(dim, h2, h1, u_ref, l).map_err(fmt)?)
        }
        other => return Err(Error::Format(format!("unknown manifold kind tag {other}"))),
    };
    expect_eof(&mut r)?;
    Ok(m)
}

pub fn save_manifold(path: &Path, m: &AnyManifold) -> Result<()> {
    write_manifold(BufWriter::new(File::create(path)?), m)
}

pub fn load_manifold(path: &Path) -> Result<AnyManifold> {
    read_manifold(BufReader::new(File::open(path)?))
}

/// Writes `header` followed by rows of floats in shortest round-trip form.
pub fn write_csv_rows<W: Write>(mut w: W, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(w.flush()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn sample_set() -> SnapshotSet {
        let g = Grid::uniform(3, 2, -1.0, 1.0).unwrap();
        let data = DMatrix::from_fn(6, 2, |i, j| (i * 10 + j) as f64 * 0.5);
        SnapshotSet::new(data, vec![0.0, 0.25], &g).unwrap()
    }

    #[test]
    fn snapshot_layout_is_exact() {
        let s = sample_set();
        let mut buf = Vec::new();
        write_snapshots(&mut buf, &s).unwrap();
        assert_eq!(&buf[..4], b"ESRM");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), -1.0);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 1.0);
        // second value of the first column, then first value of the second column
        assert_eq!(f64::from_le_bytes(buf[44..52].try_into().unwrap()), 5.0);
        assert_eq!(f64::from_le_bytes(buf[84..92].try_into().unwrap()), 0.5);
        assert_eq!(buf.len(), 36 + 8 * 12 + 16);
        assert_eq!(read_snapshots(&buf[..]).unwrap(), s);
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let mut buf = Vec::new();
        write_snapshots(&mut buf, &sample_set()).unwrap();
        assert!(read_snapshots(&buf[..buf.len() - 1]).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(read_snapshots(&longer[..]).is_err());
        buf[0] = b'X';
        assert!(matches!(read_snapshots(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn manifold_roundtrip() {
        let basis = DMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64);
        let lin: AnyManifold = LinearManifold::new(basis.clone()).into();
        let quad: AnyManifold = QuadraticManifold::new(
            basis,
            DMatrix::from_fn(4, 3, |i, j| (i as f64) - j as f64),
            DVector::from_element(4, 0.5),
        )
        .unwrap()
        .into();
        let rat: AnyManifold = RationalQuadraticManifold::new(
            2,
            (0..16).map(|k| [1.0, 2.0, 2.0, 3.0][k % 4]).collect(),
            DMatrix::from_element(4, 2, 0.1),
            DVector::from_element(4, 1.0),
            (0..16).map(|k| [1.0, 0.0, 0.5, 2.0][k % 4]).collect(),
        )
        .unwrap()
        .into();
        for m in [lin, quad, rat] {
            let mut buf = Vec::new();
            write_manifold(&mut buf, &m).unwrap();
            assert_eq!(&buf[..4], b"ESMF");
            assert_eq!(read_manifold(&buf[..]).unwrap(), m);
        }
    }
}
