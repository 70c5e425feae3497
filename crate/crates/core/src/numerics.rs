//! Dense kernels used by the closed-form block updates.
//!
//! All matrices are `ndarray` arrays in row-major (C) order. Every system
//! solved here has the shape `shift * I + scale * (PSD term)` with
//! `shift > 0`, so factorization is always Cholesky.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub type Matrix = Array2<f64>;
pub type Vector = Array1<f64>;

/// Row block size for the blocked triangular solves.
const SOLVE_BLOCK: usize = 64;

/// Relative tolerance on `|a_ij - a_ji|` accepted by [`SpdMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// A square matrix that has been checked for symmetry.
///
/// Positive definiteness is only certified when [`SpdMatrix::cholesky`]
/// succeeds; a failed factorization is reported as
/// [`NumericsError::NotPositiveDefinite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self, NumericsError> {
        let (r, c) = m.dim();
        if r != c || r == 0 {
            return Err(NumericsError::DimensionMismatch(format!(
                "expected a non-empty square matrix, got {r}x{c}"
            )));
        }
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in (i + 1)..r {
                worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
            }
        }
        if worst > SYMMETRY_TOL * scale {
            return Err(NumericsError::NotSymmetric(worst));
        }
        Ok(SpdMatrix(m))
    }

    /// Builds `scale * sym + shift * I` from a symmetric PSD matrix such as
    /// the output of [`gram`].
    pub fn regularized(sym: &Matrix, scale: f64, shift: f64) -> Result<Self, NumericsError> {
        let mut m = sym * scale;
        m.diag_mut().mapv_inplace(|d| d + shift);
        SpdMatrix::new(m)
    }

    pub fn identity_scaled(n: usize, shift: f64) -> Self {
        SpdMatrix(Matrix::eye(n) * shift)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn cholesky(&self) -> Result<Cholesky, NumericsError> {
        Cholesky::factor(&self.0)
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    fn factor(a: &Matrix) -> Result<Self, NumericsError> {
        let n = a.nrows();
        let mut l = Matrix::zeros((n, n));
        for j in 0..n {
            let row_j = l.slice(s![j, ..j]).to_owned();
            let pivot = a[[j, j]] - row_j.dot(&row_j);
            // `!(pivot > 0)` also rejects NaN pivots.
            if !(pivot > 0.0) {
                return Err(NumericsError::NotPositiveDefinite { pivot: j, value: pivot });
            }
            let diag = pivot.sqrt();
            l[[j, j]] = diag;
            for i in (j + 1)..n {
                let v = (a[[i, j]] - l.slice(s![i, ..j]).dot(&row_j)) / diag;
                l[[i, j]] = v;
            }
        }
        Ok(Cholesky { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Solves `A X = B` for all columns of `B` at once.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix, NumericsError> {
        let n = self.lower.nrows();
        if b.nrows() != n {
            return Err(NumericsError::DimensionMismatch(format!(
                "system is {n}x{n} but right-hand side has {} rows",
                b.nrows()
            )));
        }
        let mut x = b.to_owned();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        Ok(x)
    }

    /// `L Y = B`, overwriting `B` with `Y`.
    fn forward_in_place(&self, x: &mut Matrix) {
        let l = &self.lower;
        let n = l.nrows();
        let mut start = 0;
        while start < n {
            let end = (start + SOLVE_BLOCK).min(n);
            if start > 0 {
                let (done, mut rest) = x.view_mut().split_at(Axis(0), start);
                let mut block = rest.slice_mut(s![..end - start, ..]);
                general_mat_mul(-1.0, &l.slice(s![start..end, ..start]), &done, 1.0, &mut block);
            }
            for i in start..end {
                for k in start..i {
                    let coef = l[[i, k]];
                    if coef != 0.0 {
                        let (above, mut below) = x.view_mut().split_at(Axis(0), i);
                        below.row_mut(0).scaled_add(-coef, &above.row(k));
                    }
                }
                let inv = 1.0 / l[[i, i]];
                x.row_mut(i).mapv_inplace(|v| v * inv);
            }
            start = end;
        }
    }

    /// `Lᵀ X = Y`, overwriting `Y` with `X`.
    fn backward_in_place(&self, x: &mut Matrix) {
        let l = &self.lower;
        let n = l.nrows();
        let mut end = n;
        while end > 0 {
            let start = end.saturating_sub(SOLVE_BLOCK);
            if end < n {
                let (mut head, done) = x.view_mut().split_at(Axis(0), end);
                let mut block = head.slice_mut(s![start.., ..]);
                let coupling: ArrayView2<f64> = l.slice(s![end.., start..end]);
                general_mat_mul(-1.0, &coupling.t(), &done, 1.0, &mut block);
            }
            for i in (start..end).rev() {
                for k in (i + 1)..end {
                    let coef = l[[k, i]];
                    if coef != 0.0 {
                        let (mut above, below) = x.view_mut().split_at(Axis(0), k);
                        above.row_mut(i).scaled_add(-coef, &below.row(0));
                    }
                }
                let inv = 1.0 / l[[i, i]];
                x.row_mut(i).mapv_inplace(|v| v * inv);
            }
            end = start;
        }
    }
}

/// Solves `A X = B` by Cholesky factorization. Neither input is modified.
pub fn spd_solve(a: &SpdMatrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    a.cholesky()?.solve(b)
}

/// Solves `X A = B` for `X` (a right division), using `A = Aᵀ`.
pub fn spd_solve_right(a: &SpdMatrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if b.ncols() != a.dim() {
        return Err(NumericsError::DimensionMismatch(format!(
            "system is {n}x{n} but left-hand side has {} columns",
            b.ncols(),
            n = a.dim()
        )));
    }
    let xt = spd_solve(a, &b.t().to_owned())?;
    Ok(xt.reversed_axes().as_standard_layout().into_owned())
}

/// `Σ_j a_j a_jᵀ = A Aᵀ` over the columns of `A`.
///
/// The product is computed once and its upper triangle mirrored, so the
/// result is bitwise symmetric.
pub fn gram(a: &Matrix) -> Matrix {
    let mut g = a.dot(&a.t());
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            g[[j, i]] = g[[i, j]];
        }
    }
    g
}

/// Sum over columns, `A 𝟙`.
pub fn row_sums(a: &Matrix) -> Vector {
    a.sum_axis(Axis(1))
}

/// `A + v 𝟙ᵀ` (the vector is added to every column).
pub fn add_column(a: &Matrix, v: &Vector) -> Matrix {
    a + &v.view().insert_axis(Axis(1))
}

pub fn frobenius_sq(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Deterministic random stream keyed by a 64-bit seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, draws: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// An independent stream sharing this seed, selected by `stream`.
    pub fn substream(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        RngStream { seed: self.seed, draws: 0, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of scalar draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.draws += 1;
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.gen::<f64>()
    }

    /// Mutable access to the generator, e.g. for shuffling.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// `rows × cols` matrix of i.i.d. `N(0, std²)` entries, filled row by row.
pub fn gaussian_matrix(rows: usize, cols: usize, std: f64, rng: &mut RngStream) -> Matrix {
    assert!(std >= 0.0, "standard deviation must be nonnegative");
    Matrix::from_shape_fn((rows, cols), |_| std * rng.standard_normal())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_spd(n: usize, rng: &mut RngStream) -> SpdMatrix {
        let m = gaussian_matrix(n, n, 1.0, rng);
        SpdMatrix::regularized(&gram(&m), 1.0, 1.0).unwrap()
    }

    /// Gauss-Jordan inverse with partial pivoting, used only as an oracle.
    fn gauss_jordan_inverse(a: &Matrix) -> Matrix {
        let n = a.nrows();
        let mut aug = Matrix::zeros((n, 2 * n));
        aug.slice_mut(s![.., ..n]).assign(a);
        aug.slice_mut(s![.., n..]).assign(&Matrix::eye(n));
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| aug[[i, col]].abs().partial_cmp(&aug[[j, col]].abs()).unwrap())
                .unwrap();
            if piv != col {
                for k in 0..2 * n {
                    aug.swap([piv, k], [col, k]);
                }
            }
            let p = aug[[col, col]];
            for k in 0..2 * n {
                aug[[col, k]] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[[r, col]];
                    for k in 0..2 * n {
                        aug[[r, k]] -= f * aug[[col, k]];
                    }
                }
            }
        }
        aug.slice(s![.., n..]).to_owned()
    }

    #[test]
    fn identity_system_returns_rhs() {
        let mut rng = RngStream::new(1);
        let b = gaussian_matrix(3, 4, 1.0, &mut rng);
        let x = spd_solve(&SpdMatrix::identity_scaled(3, 1.0), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn scaled_identity() {
        let a = SpdMatrix::new(array![[2.0, 0.0], [0.0, 2.0]]).unwrap();
        let x = spd_solve(&a, &array![[4.0], [6.0]]).unwrap();
        // sqrt(2)² is not exactly 2, so allow one ulp-scale error
        assert!((x - array![[2.0], [3.0]]).iter().all(|d| d.abs() <= 1e-15));
    }

    #[test]
    fn matches_gauss_jordan_inverse() {
        let mut rng = RngStream::new(7);
        let a = random_spd(5, &mut rng);
        let b = gaussian_matrix(5, 3, 1.0, &mut rng);
        let x = spd_solve(&a, &b).unwrap();
        let oracle = gauss_jordan_inverse(a.as_matrix()).dot(&b);
        for (u, v) in x.iter().zip(oracle.iter()) {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }

    #[test]
    fn residual_bound_on_random_instances() {
        let mut rng = RngStream::new(11);
        for k in 0..100 {
            let n = 2 + (k * 62) / 99;
            let m = 1 + k % 9;
            let a = random_spd(n, &mut rng);
            let b = gaussian_matrix(n, m, 1.0, &mut rng);
            let a_before = a.clone();
            let b_before = b.clone();
            let x = spd_solve(&a, &b).unwrap();
            let resid = (a.as_matrix().dot(&x) - &b).mapv(|v| v * v).sum().sqrt();
            let bnorm = frobenius_sq(&b).sqrt();
            assert!(resid <= 1e-10 * (1.0 + bnorm), "n={n} resid={resid:e}");
            assert_eq!(a, a_before);
            assert_eq!(b, b_before);
        }
    }

    #[test]
    fn blocked_path_matches_unblocked_size() {
        // Crosses several SOLVE_BLOCK boundaries.
        let mut rng = RngStream::new(3);
        let a = random_spd(150, &mut rng);
        let b = gaussian_matrix(150, 5, 1.0, &mut rng);
        let x = spd_solve(&a, &b).unwrap();
        let resid = (a.as_matrix().dot(&x) - &b).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
        assert!(resid < 1e-9, "{resid:e}");
    }

    #[test]
    fn right_solve() {
        let mut rng = RngStream::new(5);
        let a = random_spd(4, &mut rng);
        let b = gaussian_matrix(3, 4, 1.0, &mut rng);
        let x = spd_solve_right(&a, &b).unwrap();
        let resid = (x.dot(a.as_matrix()) - &b).mapv(f64::abs).sum();
        assert!(resid < 1e-10);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SpdMatrix::new(array![[1.0, 2.0], [2.0, 1.0]]).unwrap();
        let err = spd_solve(&a, &array![[1.0], [1.0]]).unwrap_err();
        assert!(matches!(err, NumericsError::NotPositiveDefinite { pivot: 1, .. }));
        let zero = SpdMatrix::new(Matrix::zeros((2, 2))).unwrap();
        assert!(matches!(zero.cholesky(), Err(NumericsError::NotPositiveDefinite { pivot: 0, .. })));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        assert!(matches!(
            SpdMatrix::new(array![[1.0, 0.5], [0.0, 1.0]]),
            Err(NumericsError::NotSymmetric(_))
        ));
    }

    #[test]
    fn gram_small_cases() {
        assert_eq!(gram(&Matrix::eye(3)), Matrix::eye(3));
        assert_eq!(gram(&array![[1.0], [2.0]]), array![[1.0, 2.0], [2.0, 4.0]]);
    }

    #[test]
    fn gram_matches_naive_loop() {
        let mut rng = RngStream::new(9);
        let a = gaussian_matrix(4, 7, 1.0, &mut rng);
        let g = gram(&a);
        for i in 0..4 {
            for k in 0..4 {
                let mut acc = 0.0;
                for j in 0..7 {
                    acc += a[[i, j]] * a[[k, j]];
                }
                assert!((g[[i, k]] - acc).abs() < 1e-12);
            }
        }
        assert_eq!(g, g.t());
    }

    #[test]
    fn gaussian_determinism_and_zero_std() {
        let a = gaussian_matrix(3, 5, 0.3, &mut RngStream::new(42));
        let b = gaussian_matrix(3, 5, 0.3, &mut RngStream::new(42));
        assert_eq!(a, b);
        let mut rng = RngStream::new(1);
        assert_eq!(gaussian_matrix(2, 2, 0.0, &mut rng), Matrix::zeros((2, 2)));
        assert_eq!(rng.draws(), 4);
    }

    #[test]
    fn gaussian_moments() {
        let m = gaussian_matrix(1000, 1000, 0.01, &mut RngStream::new(2024));
        let n = m.len() as f64;
        let mean = m.sum() / n;
        let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e-3);
        assert!((var.sqrt() - 0.01).abs() < 0.02 * 0.01);
    }

    #[test]
    fn substreams_differ() {
        let base = RngStream::new(5);
        let mut a = base.substream(1);
        let mut b = base.substream(2);
        assert_ne!(a.standard_normal(), b.standard_normal());
    }
}
