use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::lm::{levenberg_marquardt, LeastSquares};
use super::{coordinates, FitConfig};
use crate::error::{check_len, Error, Result};
use crate::manifold::{n_quadratic_features, quadratic_features, RationalQuadraticManifold};

/// Outcome of one row fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowFit {
    pub row: usize,
    pub iters: usize,
    /// `‖φ_i(A) − X_i‖₂` of the kept coefficients.
    pub final_residual: f64,
    /// The denominator-free least-squares row was kept.
    pub fallback_used: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    pub rows: Vec<RowFit>,
}

impl FitReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,iters,final_residual,fallback_used")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:e},{}", r.row, r.iters, r.final_residual, r.fallback_used)?;
        }
        Ok(())
    }

    pub fn n_fallbacks(&self) -> usize {
        self.rows.iter().filter(|r| r.fallback_used).count()
    }
}

/// Shared data of all row problems: per-snapshot numerator features
/// `[k(a), a, 1]` and coordinates, both row-major.
struct Design {
    r: usize,
    n_s: usize,
    n_num: usize,
    feats: Vec<f64>,
    coords: Vec<f64>,
    /// Reciprocal feature column norms, used to balance the linear solves.
    col_scale: Vec<f64>,
}

impl Design {
    fn new(a: &DMatrix<f64>) -> Self {
        let (n_s, r) = a.shape();
        let n_num = n_quadratic_features(r) + r + 1;
        let mut feats = Vec::with_capacity(n_s * n_num);
        let mut coords = Vec::with_capacity(n_s * r);
        for s in 0..n_s {
            let row: Vec<f64> = a.row(s).iter().copied().collect();
            feats.extend(quadratic_features(&row));
            feats.extend(&row);
            feats.push(1.0);
            coords.extend(row);
        }
        let mut col_scale = vec![0.0; n_num];
        for f in feats.chunks_exact(n_num) {
            for (c, v) in col_scale.iter_mut().zip(f) {
                *c += v * v;
            }
        }
        for c in &mut col_scale {
            *c = if *c > 0.0 { 1.0 / c.sqrt() } else { 1.0 };
        }
        Self {
            r,
            n_s,
            n_num,
            feats,
            coords,
            col_scale,
        }
    }

    fn n_l(&self) -> usize {
        n_quadratic_features(self.r)
    }

    fn n_params(&self) -> usize {
        self.n_num + self.n_l()
    }

    /// Index of `L_kl` (`k ≥ l`) in the packed lower triangle.
    fn l_index(k: usize, l: usize) -> usize {
        k * (k + 1) / 2 + l
    }
}

/// Separable row problem: for a fixed denominator factor `L` the numerator
/// weights solve a linear least-squares problem, so only `L` is iterated.
struct RowProblem<'a> {
    design: &'a Design,
    y: &'a [f64],
}

/// Numerator weights for a fixed `L`, with the data needed for the reduced
/// Jacobian.
struct LinearSolve {
    w: Vec<f64>,
    fit: Vec<f64>,
    den: Vec<f64>,
    z: Vec<f64>,
    /// Orthonormal basis of the range of the weighted feature matrix, when
    /// requested.
    q: Option<DMatrix<f64>>,
}

impl RowProblem<'_> {
    fn solve_linear(&self, l: &[f64], want_q: bool) -> Option<LinearSolve> {
        let d = self.design;
        let (r, n_s, n_num) = (d.r, d.n_s, d.n_num);
        let mut den = vec![1.0; n_s];
        let mut z = vec![0.0; n_s * r];
        let mut a = DMatrix::zeros(n_s, n_num);
        let mut b = DVector::zeros(n_s);
        for s in 0..n_s {
            let coords = &d.coords[s * r..(s + 1) * r];
            let zs = &mut z[s * r..(s + 1) * r];
            for q in 0..r {
                zs[q] = (q..r).map(|p| l[Design::l_index(p, q)] * coords[p]).sum();
                den[s] += zs[q] * zs[q];
            }
            if !den[s].is_finite() {
                return None;
            }
            let f = &d.feats[s * n_num..(s + 1) * n_num];
            for c in 0..n_num {
                a[(s, c)] = f[c] * d.col_scale[c] / den[s];
            }
            b[s] = self.y[s];
        }
        let (c, q) = least_squares(a.clone(), &b, want_q)?;
        let fit = &a * &c;
        let w = c.iter().zip(&d.col_scale).map(|(c, s)| c * s).collect();
        Some(LinearSolve {
            w,
            fit: fit.as_slice().to_vec(),
            den,
            z,
            q,
        })
    }
}

/// Minimum-norm solution of `a c ≈ b`, optionally with an orthonormal basis
/// of `range(a)`.
fn least_squares(
    a: DMatrix<f64>,
    b: &DVector<f64>,
    want_q: bool,
) -> Option<(DVector<f64>, Option<DMatrix<f64>>)> {
    let n = a.ncols();
    if a.nrows() >= n {
        let qr = a.clone().qr();
        let rm = qr.r();
        let rdiag = rm.diagonal();
        let rmax = rdiag.amax();
        let rmin = rdiag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if rmax > 0.0 && rmin > 1e-11 * rmax {
            let mut rhs = b.clone();
            qr.q_tr_mul(&mut rhs);
            let c = rm.solve_upper_triangular(&rhs.rows(0, n).into_owned())?;
            return Some((c, want_q.then(|| qr.q())));
        }
    }
    let svd = a.svd(true, true);
    let (u, v_t) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-11 * smax)
        .collect();
    let mut basis = DMatrix::zeros(u.nrows(), keep.len());
    let mut c = DVector::zeros(n);
    for (col, &k) in keep.iter().enumerate() {
        basis.set_column(col, &u.column(k));
        let coeff = u.column(k).dot(b) / svd.singular_values[k];
        c.axpy(coeff, &v_t.row(k).transpose(), 1.0);
    }
    let u = basis;
    Some((c, want_q.then_some(u)))
}

impl LeastSquares for RowProblem<'_> {
    fn n_params(&self) -> usize {
        self.design.n_l()
    }

    fn n_residuals(&self) -> usize {
        self.design.n_s
    }

    fn eval(&self, l: &[f64], res: &mut [f64], jac: Option<&mut DMatrix<f64>>) -> bool {
        let Some(sol) = self.solve_linear(l, jac.is_some()) else {
            return false;
        };
        for s in 0..res.len() {
            res[s] = sol.fit[s] - self.y[s];
        }
        if let Some(j) = jac {
            // Kaufman's approximation: (I − QQᵀ) ∂A/∂L c.
            let d = self.design;
            let r = d.r;
            for s in 0..d.n_s {
                let a = &d.coords[s * r..(s + 1) * r];
                let z = &sol.z[s * r..(s + 1) * r];
                let scale = -2.0 * sol.fit[s] / sol.den[s];
                for p in 0..r {
                    for q in 0..=p {
                        j[(s, Design::l_index(p, q))] = scale * z[q] * a[p];
                    }
                }
            }
            let q = sol.q.as_ref().expect("basis requested with the Jacobian");
            let proj = q * q.tr_mul(j);
            *j -= proj;
        }
        res.iter().all(|v| v.is_finite())
    }
}

struct RowResult {
    params: Vec<f64>,
    fit: RowFit,
    from_lm: bool,
}

fn fit_row(
    design: &Design,
    pinv: &DMatrix<f64>,
    y: &[f64],
    row: usize,
    warm: Option<&[f64]>,
    cfg: &FitConfig,
    l_scale: f64,
) -> RowResult {
    let problem = RowProblem { design, y };
    let n_num = design.n_num;
    let n_l = design.n_l();

    // denominator-free least squares (L = 0)
    let w_ls = pinv * DVector::from_column_slice(y);
    let mut fallback = vec![0.0; design.n_params()];
    fallback[..n_num].copy_from_slice(w_ls.as_slice());
    let fallback_res = residual_norm(w_ls.as_slice(), &vec![0.0; n_l], design, y);

    let mut starts = Vec::new();
    match warm {
        Some(p) => starts.push(p[n_num..].to_vec()),
        None => {
            let mut ones = vec![0.0; n_l];
            for k in 0..design.r {
                for m in 0..=k {
                    ones[Design::l_index(k, m)] = 1.0;
                }
            }
            starts.push(ones);
        }
    }
    if cfg.multi_start {
        let mut s = vec![0.0; n_l];
        for k in 0..design.r {
            s[Design::l_index(k, k)] = l_scale;
        }
        starts.push(s);
    }

    let mut best = RowResult {
        params: fallback,
        fit: RowFit {
            row,
            iters: 0,
            final_residual: fallback_res,
            fallback_used: true,
        },
        from_lm: false,
    };
    for l0 in starts {
        let out = levenberg_marquardt(&problem, &l0, &cfg.lm);
        if !out.finite {
            continue;
        }
        let Some(sol) = problem.solve_linear(&out.x, false) else {
            continue;
        };
        let resid = residual_norm(&sol.w, &out.x, design, y);
        if resid < best.fit.final_residual {
            let mut params = sol.w;
            params.extend(out.x);
            best = RowResult {
                params,
                fit: RowFit {
                    row,
                    iters: out.iters,
                    final_residual: resid,
                    fallback_used: false,
                },
                from_lm: true,
            };
        }
    }
    if best.fit.fallback_used {
        log::warn!("row {row}: rational fit did not improve on the denominator-free fit");
    }
    best
}

/// `‖num/den − y‖₂` evaluated directly from unscaled weights.
fn residual_norm(w: &[f64], l: &[f64], design: &Design, y: &[f64]) -> f64 {
    let r = design.r;
    let mut sum = 0.0;
    for s in 0..design.n_s {
        let f = &design.feats[s * design.n_num..(s + 1) * design.n_num];
        let a = &design.coords[s * r..(s + 1) * r];
        let num: f64 = f.iter().zip(w).map(|(f, w)| f * w).sum();
        let mut den = 1.0;
        for q in 0..r {
            let zq: f64 = (q..r).map(|p| l[Design::l_index(p, q)] * a[p]).sum();
            den += zq * zq;
        }
        let e = num / den - y[s];
        sum += e * e;
    }
    if sum.is_finite() {
        sum.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Fits every row of `x` as a ratio of quadratics in the POD coordinates
/// `A = (ΦᵀX)ᵀ`, with the denominator parameterized by Cholesky factors.
pub fn fit_rational_quadratic(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    n_cells: usize,
    cfg: &FitConfig,
) -> Result<(RationalQuadraticManifold, FitReport)> {
    cfg.validate(x.nrows(), x.ncols())?;
    check_len("basis columns", cfg.r, basis.ncols())?;
    if n_cells == 0 || x.nrows() % n_cells != 0 {
        return Err(Error::InvalidArgument(format!(
            "{} rows do not split into blocks of {n_cells} cells",
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("snapshot matrix"));
    }
    let a = coordinates(basis, x)?;
    let design = Design::new(&a);
    let f = DMatrix::from_row_slice(design.n_s, design.n_num, &design.feats);
    let pinv = f
        .clone()
        .pseudo_inverse(1e-12 * f.amax().max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let amax = (0..a.nrows()).map(|s| a.row(s).norm()).fold(0.0, f64::max);
    let l_scale = if amax > 0.0 { 0.1 / amax } else { 0.1 };

    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect();
    let total = rows.len();
    let results: Vec<RowResult> = if cfg.parallel_rows {
        rows.par_iter()
            .enumerate()
            .map(|(i, y)| fit_row(&design, &pinv, y, i, None, cfg, l_scale))
            .collect()
    } else {
        let mut out: Vec<RowResult> = Vec::with_capacity(total);
        for (i, y) in rows.iter().enumerate() {
            let warm = match out.last() {
                Some(prev) if cfg.warm_start && prev.from_lm && i % n_cells != 0 => {
                    Some(prev.params.as_slice())
                }
                _ => None,
            };
            out.push(fit_row(&design, &pinv, y, i, warm, cfg, l_scale));
            if (i + 1) % (total / 10).max(1) == 0 {
                log::info!("rational fit: {}/{} rows", i + 1, total);
            }
        }
        out
    };

    let r = cfg.r;
    let n = x.nrows();
    let n_q = n_quadratic_features(r);
    let mut h2 = vec![0.0; n * r * r];
    let mut h1 = DMatrix::zeros(n, r);
    let mut u_ref = DVector::zeros(n);
    let mut l = vec![0.0; n * r * r];
    for (i, res) in results.iter().enumerate() {
        let p = &res.params;
        let hb = &mut h2[i * r * r..(i + 1) * r * r];
        let mut f = 0;
        for j in 0..r {
            for k in j..r {
                if j == k {
                    hb[j * r + k] = p[f];
                } else {
                    hb[j * r + k] = 0.5 * p[f];
                    hb[k * r + j] = 0.5 * p[f];
                }
                f += 1;
            }
        }
        for j in 0..r {
            h1[(i, j)] = p[n_q + j];
        }
        u_ref[i] = p[n_q + r];
        let lb = &mut l[i * r * r..(i + 1) * r * r];
        for k in 0..r {
            for m in 0..=k {
                lb[k * r + m] = p[design.n_num + Design::l_index(k, m)];
            }
        }
    }
    let report = FitReport {
        rows: results.iter().map(|r| r.fit).collect(),
    };
    Ok((RationalQuadraticManifold::new(r, h2, h1, u_ref, l)?, report))
}
