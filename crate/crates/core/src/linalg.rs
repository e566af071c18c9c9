//! Dense symmetric positive-definite helpers.
//!
//! nalgebra's Cholesky is column-at-a-time, which is fine for the kernel
//! matrices of a few hundred points but becomes the bottleneck once the
//! bandit draws joint samples over pools of thousands of candidates. The
//! routines here are right-looking blocked variants whose bulk work runs
//! through nalgebra's `gemm`.

use nalgebra::{DMatrix, DMatrixViewMut};

use crate::error::{Error, Result};

const BLOCK: usize = 64;

/// Jitter levels (relative to the caller's scale) tried after a plain
/// factorization fails.
pub const JITTER_SCHEDULE: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Lower Cholesky factor `L` with `A + jitter·I = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
    jitter: f64,
}

fn chol_unblocked(a: &mut DMatrixViewMut<'_, f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut s = a[(j, j)];
        for p in 0..j {
            s -= a[(j, p)] * a[(j, p)];
        }
        if !(s > 0.0) || !s.is_finite() {
            return false;
        }
        let d = s.sqrt();
        a[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for p in 0..j {
                v -= a[(i, p)] * a[(j, p)];
            }
            a[(i, j)] = v / d;
        }
    }
    true
}

/// Overwrites the lower triangle of `a` with its Cholesky factor and zeroes
/// the strict upper triangle. Returns `false` if `a` is not numerically
/// positive definite; `a` is then left in an unspecified state.
pub fn cholesky_in_place(a: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut k = 0;
    while k < n {
        let kb = BLOCK.min(n - k);
        if !chol_unblocked(&mut a.view_mut((k, k), (kb, kb))) {
            return false;
        }
        let rest = n - k - kb;
        if rest > 0 {
            let l11 = a.view((k, k), (kb, kb)).clone_owned();
            let mut panel = a.view((k + kb, k), (rest, kb)).clone_owned();
            // panel <- panel · L11^{-T}, one column at a time
            for j in 0..kb {
                for p in 0..j {
                    let l = l11[(j, p)];
                    if l != 0.0 {
                        let (src, mut dst) = panel.columns_range_pair_mut(p, j);
                        dst.axpy(-l, &src, 1.0);
                    }
                }
                let d = l11[(j, j)];
                panel.column_mut(j).scale_mut(1.0 / d);
            }
            a.view_mut((k + kb, k), (rest, kb)).copy_from(&panel);
            let panel_t = panel.transpose();
            a.view_mut((k + kb, k + kb), (rest, rest))
                .gemm(-1.0, &panel, &panel_t, 1.0);
        }
        k += kb;
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    a.iter().all(|v| v.is_finite())
}

impl Cholesky {
    /// Factors `a`, escalating through [`JITTER_SCHEDULE`] (multiplied by
    /// `scale`) when the plain factorization fails.
    pub fn factor(a: &DMatrix<f64>, scale: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix to factor"));
        }
        let mut l = a.clone();
        if cholesky_in_place(&mut l) {
            return Ok(Self { l, jitter: 0.0 });
        }
        let mut last = 0.0;
        for rel in JITTER_SCHEDULE {
            last = rel * scale;
            let mut l = a.clone();
            for i in 0..l.nrows() {
                l[(i, i)] += last;
            }
            if cholesky_in_place(&mut l) {
                return Ok(Self { l, jitter: last });
            }
        }
        Err(Error::NotPositiveDefinite { jitter: last })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// The jitter that had to be added to the diagonal (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `L⁻¹ b` for a single right-hand side.
    pub fn solve_lower_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in 0..n {
            let v = x[j] / self.l[(j, j)];
            x[j] = v;
            if v != 0.0 {
                let col = self.l.column(j);
                for i in (j + 1)..n {
                    x[i] -= col[i] * v;
                }
            }
        }
        x
    }

    /// `L⁻ᵀ b` for a single right-hand side.
    pub fn solve_upper_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in (0..n).rev() {
            let col = self.l.column(j);
            let mut v = x[j];
            for i in (j + 1)..n {
                v -= col[i] * x[i];
            }
            x[j] = v / col[j];
        }
        x
    }

    /// `A⁻¹ b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper_vec(&self.solve_lower_vec(b))
    }

    /// `L⁻¹ B` for a block of right-hand sides.
    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let q = b.ncols();
        let mut x = b.clone();
        let mut k = 0;
        while k < n {
            let kb = BLOCK.min(n - k);
            for c in 0..q {
                let mut col = x.view_mut((k, c), (kb, 1));
                for j in 0..kb {
                    let v = col[j] / self.l[(k + j, k + j)];
                    col[j] = v;
                    if v != 0.0 {
                        for i in (j + 1)..kb {
                            col[i] -= self.l[(k + i, k + j)] * v;
                        }
                    }
                }
            }
            let rest = n - k - kb;
            if rest > 0 {
                let solved = x.view((k, 0), (kb, q)).clone_owned();
                let l21 = self.l.view((k + kb, k), (rest, kb));
                x.view_mut((k + kb, 0), (rest, q))
                    .gemm(-1.0, &l21, &solved, 1.0);
            }
            k += kb;
        }
        x
    }

    /// `A⁻¹` computed as `L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let linv = self.solve_lower_mat(&DMatrix::identity(n, n));
        let linv_t = linv.transpose();
        &linv_t * &linv
    }

    /// `L z`.
    pub fn mul_lower_vec(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(z.len(), n);
        let mut out = vec![0.0; n];
        for j in 0..n {
            let zj = z[j];
            if zj == 0.0 {
                continue;
            }
            let col = self.l.column(j);
            for i in j..n {
                out[i] += col[i] * zj;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn blocked_factor_matches_nalgebra() {
        for &n in &[1usize, 5, 64, 65, 150] {
            let a = random_spd(n, n as u64);
            let ours = Cholesky::factor(&a, 1.0).unwrap();
            let theirs = a.clone().cholesky().unwrap().unpack();
            let diff = (ours.lower() - &theirs).abs().max();
            assert!(diff < 1e-9, "n={n}: {diff}");
            let rebuilt = ours.lower() * ours.lower().transpose();
            assert!((rebuilt - &a).abs().max() < 1e-9);
        }
    }

    #[test]
    fn solves_and_inverse_agree() {
        let n = 130;
        let a = random_spd(n, 7);
        let c = Cholesky::factor(&a, 1.0).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = c.solve_vec(&b);
        let ax = &a * nalgebra::DVector::from_column_slice(&x);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-8);
        }
        let inv = c.inverse();
        let eye = &a * &inv;
        assert!((eye - DMatrix::<f64>::identity(n, n)).abs().max() < 1e-8);

        let bm = DMatrix::from_fn(n, 3, |i, j| ((i + 3 * j) as f64).cos());
        let lx = c.solve_lower_mat(&bm);
        let back = c.lower() * &lx;
        assert!((back - bm).abs().max() < 1e-9);
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let v = DMatrix::from_fn(50, 1, |i, _| i as f64 / 50.0);
        let a = &v * v.transpose();
        let c = Cholesky::factor(&a, 1.0).unwrap();
        assert!(c.jitter() > 0.0);
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = DMatrix::<f64>::identity(4, 4);
        a[(2, 2)] = -1.0;
        assert!(matches!(
            Cholesky::factor(&a, 1.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
