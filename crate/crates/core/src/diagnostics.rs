//! Error metrics comparing reduced solutions with full-order data, and the
//! report files assembled from them.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::fitting::reconstruction_error;
use crate::grid::Grid;
use crate::manifold::Manifold;

/// `‖u_fom − u_rom‖_Ω`.
pub fn eps_u(u_fom: &[f64], u_rom: &[f64], grid: &Grid) -> Result<f64> {
    check_len("reduced state", u_fom.len(), u_rom.len())?;
    let diff: Vec<f64> = u_fom.iter().zip(u_rom).map(|(a, b)| a - b).collect();
    grid.norm(&diff)
}

/// `‖(I − ΦΦᵀΩ)u‖_Ω` for an Ω-orthonormal basis `Φ`.
pub fn eps_proj(u: &[f64], basis: &DMatrix<f64>, grid: &Grid) -> Result<f64> {
    check_len("state", grid.n_dof(), u.len())?;
    check_len("basis rows", grid.n_dof(), basis.nrows())?;
    let w = DVector::from_iterator(u.len(), (0..u.len()).map(|i| grid.dof_width(i)));
    if basis.ncols() > 0 {
        let mut wb = basis.clone();
        for (mut row, wi) in wb.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let gram = basis.tr_mul(&wb);
        let dev = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if dev > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "basis is not Ω-orthonormal (deviation {dev:e})"
            )));
        }
    }
    let uv = DVector::from_column_slice(u);
    let coeffs = basis.tr_mul(&uv.component_mul(&w));
    let resid = uv - basis * coeffs;
    grid.norm(resid.as_slice())
}

/// `|S_fom − S_rom|`.
pub fn eps_entropy(s_fom: f64, s_rom: f64) -> f64 {
    (s_fom - s_rom).abs()
}

/// `|S_rom(t) − S_rom(0)|`.
pub fn eps_entropy0(s_rom_0: f64, s_rom_t: f64) -> f64 {
    (s_rom_t - s_rom_0).abs()
}

/// `max_{i,j} |φ(A) − X|`.
pub fn eps_xt_max<M: Manifold + ?Sized>(m: &M, x: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    Ok(reconstruction_error(m, x, a)?.1)
}

/// Time series on the snapshot grid plus scalar summaries.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// Named series in column order; NaN marks times a run did not reach.
    pub series: Vec<(String, Vec<f64>)>,
    pub eps_xt_max: BTreeMap<String, f64>,
    pub wall_times: BTreeMap<String, f64>,
}

impl ComparisonReport {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            ..Self::default()
        }
    }

    pub fn add_series(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        check_len("report series", self.times.len(), values.len())?;
        if self.series.iter().any(|(n, _)| *n == name) {
            return Err(Error::InvalidArgument(format!("duplicate report series `{name}`")));
        }
        self.series.push((name, values));
        Ok(())
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.series.iter().map(|(n, _)| n.clone()));
        writeln!(w, "{}", header.join(","))?;
        for (j, t) in self.times.iter().enumerate() {
            let mut line = vec![format!("{t:e}")];
            for (_, v) in &self.series {
                line.push(if v[j].is_nan() { String::new() } else { format!("{:e}", v[j]) });
            }
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Summary JSON: reconstruction errors, wall times and per-series maxima.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            eps_xt_max: &'a BTreeMap<String, f64>,
            wall_times: &'a BTreeMap<String, f64>,
            series_max: BTreeMap<&'a str, Option<f64>>,
        }
        let series_max = self
            .series
            .iter()
            .map(|(n, v)| {
                let m = v.iter().filter(|x| !x.is_nan()).cloned().reduce(f64::max);
                (n.as_str(), m)
            })
            .collect();
        let s = Summary {
            eps_xt_max: &self.eps_xt_max,
            wall_times: &self.wall_times,
            series_max,
        };
        serde_json::to_writer_pretty(w, &s).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_u_examples() {
        let g = Grid::uniform(100, 1, 0.0, 1.0).unwrap();
        let a = vec![0.3; 100];
        assert_eq!(eps_u(&a, &a, &g).unwrap(), 0.0);
        let b = vec![1.3; 100];
        assert!((eps_u(&b, &a, &g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eps_proj_examples() {
        let g = Grid::uniform(4, 1, 0.0, 1.0).unwrap();
        let u = [1.0, 2.0, 3.0, 4.0];
        let empty = DMatrix::zeros(4, 0);
        assert!((eps_proj(&u, &empty, &g).unwrap() - g.norm(&u).unwrap()).abs() < 1e-15);
        let basis = DMatrix::from_column_slice(4, 1, &u) / g.norm(&u).unwrap();
        assert!(eps_proj(&u, &basis, &g).unwrap() < 1e-12);
        assert!(eps_proj(&u, &DMatrix::from_element(4, 1, 1.0 + 1e-3), &g).is_err());
    }

    #[test]
    fn entropy_errors_are_symmetric() {
        assert_eq!(eps_entropy(1.0, 1.0), 0.0);
        assert_eq!(eps_entropy(2.0, -1.0), eps_entropy(-1.0, 2.0));
        assert_eq!(eps_entropy0(3.0, 2.5), 0.5);
    }

    #[test]
    fn report_csv_marks_missing_values() {
        let mut r = ComparisonReport::new(vec![0.0, 0.5]);
        r.add_series("eps_u_es", vec![0.0, f64::NAN]).unwrap();
        assert!(r.add_series("eps_u_es", vec![0.0, 0.0]).is_err());
        assert!(r.add_series("short", vec![0.0]).is_err());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,eps_u_es\n0e0,0e0\n5e-1,\n");
    }
}
