use nalgebra::{DMatrix, DVector};

use super::Manifold;
use crate::error::{check_len, Error, Result};

/// Row-wise ratio of quadratics,
/// `φ_i(a) = (aᵀH²_i a + H¹_i a + u_i) / (aᵀL_iL_iᵀa + 1)`.
///
/// The denominator is parameterized by lower-triangular factors `L_i`, so it is
/// at least one for every real `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalQuadraticManifold {
    r: usize,
    h2: Vec<f64>,
    h1: DMatrix<f64>,
    u_ref: DVector<f64>,
    l: Vec<f64>,
}

impl RationalQuadraticManifold {
    /// `h2` and `l` hold one row-major `r × r` block per row. `H²` blocks are
    /// symmetrized and the strict upper triangles of `L` blocks are discarded.
    pub fn new(
        r: usize,
        mut h2: Vec<f64>,
        h1: DMatrix<f64>,
        u_ref: DVector<f64>,
        mut l: Vec<f64>,
    ) -> Result<Self> {
        let n = u_ref.len();
        if r == 0 {
            return Err(Error::InvalidArgument("manifold dimension must be positive".into()));
        }
        check_len("H1 rows", n, h1.nrows())?;
        check_len("H1 columns", r, h1.ncols())?;
        check_len("H2 blocks", n * r * r, h2.len())?;
        check_len("L blocks", n * r * r, l.len())?;
        for (hb, lb) in h2.chunks_exact_mut(r * r).zip(l.chunks_exact_mut(r * r)) {
            for p in 0..r {
                for q in p + 1..r {
                    let s = 0.5 * (hb[p * r + q] + hb[q * r + p]);
                    hb[p * r + q] = s;
                    hb[q * r + p] = s;
                    lb[p * r + q] = 0.0;
                }
            }
        }
        Ok(Self { r, h2, h1, u_ref, l })
    }

    pub fn h2_block(&self, row: usize) -> &[f64] {
        &self.h2[row * self.r * self.r..(row + 1) * self.r * self.r]
    }

    pub fn l_block(&self, row: usize) -> &[f64] {
        &self.l[row * self.r * self.r..(row + 1) * self.r * self.r]
    }

    pub fn h2(&self) -> &[f64] {
        &self.h2
    }

    pub fn h1(&self) -> &DMatrix<f64> {
        &self.h1
    }

    pub fn u_ref(&self) -> &DVector<f64> {
        &self.u_ref
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    /// `G_i = L_iL_iᵀ` as a row-major block.
    pub fn g_block(&self, row: usize) -> Vec<f64> {
        let r = self.r;
        let lb = self.l_block(row);
        let mut g = vec![0.0; r * r];
        for p in 0..r {
            for q in 0..r {
                g[p * r + q] = (0..r).map(|k| lb[p * r + k] * lb[q * r + k]).sum();
            }
        }
        g
    }

    /// Numerator, denominator and the auxiliary vectors `H²a`, `Lᵀa` of one row.
    fn row_parts(&self, row: usize, a: &[f64], ha: &mut [f64], z: &mut [f64]) -> (f64, f64) {
        let r = self.r;
        let hb = self.h2_block(row);
        let lb = self.l_block(row);
        let mut num = self.u_ref[row];
        for p in 0..r {
            ha[p] = (0..r).map(|q| hb[p * r + q] * a[q]).sum();
            num += a[p] * ha[p] + self.h1[(row, p)] * a[p];
        }
        let mut den = 1.0;
        for q in 0..r {
            z[q] = (q..r).map(|p| lb[p * r + q] * a[p]).sum();
            den += z[q] * z[q];
        }
        (num, den)
    }

    /// Per-row denominators `aᵀG_i a + 1`.
    pub fn denominators(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len("coordinates", self.r, a.len())?;
        let (mut ha, mut z) = (vec![0.0; self.r], vec![0.0; self.r]);
        Ok((0..self.n_dof())
            .map(|i| self.row_parts(i, a, &mut ha, &mut z).1)
            .collect())
    }
}

impl Manifold for RationalQuadraticManifold {
    fn dim(&self) -> usize {
        self.r
    }

    fn n_dof(&self) -> usize {
        self.u_ref.len()
    }

    fn decode(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len("coordinates", self.r, a.len())?;
        let (mut ha, mut z) = (vec![0.0; self.r], vec![0.0; self.r]);
        Ok((0..self.n_dof())
            .map(|i| {
                let (num, den) = self.row_parts(i, a, &mut ha, &mut z);
                num / den
            })
            .collect())
    }

    fn jacobian(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        let r = self.r;
        check_len("coordinates", r, a.len())?;
        let (mut ha, mut z) = (vec![0.0; r], vec![0.0; r]);
        let mut jac = DMatrix::zeros(self.n_dof(), r);
        for i in 0..self.n_dof() {
            let (num, den) = self.row_parts(i, a, &mut ha, &mut z);
            let lb = self.l_block(i);
            let scale = 2.0 * num / (den * den);
            for p in 0..r {
                let lz: f64 = (0..=p).map(|q| lb[p * r + q] * z[q]).sum();
                jac[(i, p)] = (2.0 * ha[p] + self.h1[(i, p)]) / den - scale * lz;
            }
        }
        Ok(jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_example() -> RationalQuadraticManifold {
        RationalQuadraticManifold::new(
            1,
            vec![0.0],
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn scalar_decode_and_jacobian() {
        let m = scalar_example();
        assert_eq!(m.decode(&[1.0]).unwrap(), vec![0.5]);
        assert_eq!(m.jacobian(&[0.0]).unwrap()[(0, 0)], 1.0);
        assert_eq!(m.jacobian(&[1.0]).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn origin_decodes_to_reference() {
        let m = RationalQuadraticManifold::new(
            2,
            vec![1.0, 2.0, 2.0, 3.0, 0.5, 0.0, 0.0, 0.5],
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DVector::from_vec(vec![0.25, -1.5]),
            vec![1.0, 0.0, 0.3, 2.0, 0.1, 7.0, 0.4, 0.2],
        )
        .unwrap();
        assert_eq!(m.decode(&[0.0, 0.0]).unwrap(), vec![0.25, -1.5]);
        // the strict upper triangle of L is dropped
        assert_eq!(m.l_block(1), &[0.1, 0.0, 0.4, 0.2]);
    }

    #[test]
    fn h2_is_symmetrized() {
        let m = RationalQuadraticManifold::new(
            2,
            vec![1.0, 3.0, 1.0, 0.0],
            DMatrix::zeros(1, 2),
            DVector::zeros(1),
            vec![0.0; 4],
        )
        .unwrap();
        assert_eq!(m.h2_block(0), &[1.0, 2.0, 2.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn pole_free_with_exact_jacobian(
            params in proptest::collection::vec(-2.0f64..2.0, 3 * (2 * 9 + 3 + 1)),
            a in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let (n, r) = (3, 3);
            let (h2, rest) = params.split_at(n * r * r);
            let (l, rest) = rest.split_at(n * r * r);
            let (h1, u_ref) = rest.split_at(n * r);
            let m = RationalQuadraticManifold::new(
                r,
                h2.to_vec(),
                DMatrix::from_row_slice(n, r, h1),
                DVector::from_column_slice(u_ref),
                l.to_vec(),
            )
            .unwrap();
            proptest::prop_assert!(m.denominators(&a).unwrap().iter().all(|d| *d >= 1.0));
            let exact = m.jacobian(&a).unwrap();
            let fd = crate::manifold::finite_difference_jacobian(&m, &a, 1e-6).unwrap();
            proptest::prop_assert!((&exact - fd).amax() <= 1e-6 * (1.0 + exact.amax()));
        }
    }
}
