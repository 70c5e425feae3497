//! Reference minimizer for box-constrained, strongly convex quadratic blocks.
//!
//! A block is `Σ_c ½ x_cᵀ H x_c − r_cᵀ x_c` over the columns `x_c` of a
//! matrix, subject to `lo ≤ x ≤ hi` entrywise. Projected gradient descent
//! with step `1/L` (`L` a Gershgorin bound on the top eigenvalue of `H`)
//! is slow but needs nothing beyond matrix-vector products, which makes it
//! a useful independent check on the closed-form block solutions.

use super::BcdError;
use crate::numerics::Matrix;
use crate::prox::Interval;

pub const ORACLE_TOL: f64 = 1e-10;
pub const ORACLE_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct QuadraticBlock {
    /// Symmetric positive definite `n × n`.
    pub hessian: Matrix,
    /// `n × m`; one column per independent copy of the problem.
    pub linear: Matrix,
    pub bounds: Interval,
}

impl QuadraticBlock {
    pub fn objective(&self, x: &Matrix) -> f64 {
        let hx = self.hessian.dot(x);
        x.iter().zip(hx.iter()).zip(self.linear.iter()).map(|((xi, hi), ri)| 0.5 * xi * hi - ri * xi).sum()
    }

    pub fn gradient(&self, x: &Matrix) -> Matrix {
        self.hessian.dot(x) - &self.linear
    }

    /// Frobenius norm of `L (x − P(x − ∇/L))` for step constant `lipschitz`.
    pub fn gradient_map_norm(&self, x: &Matrix, lipschitz: f64) -> f64 {
        let g = self.gradient(x);
        let mut acc = 0.0;
        for (xi, gi) in x.iter().zip(g.iter()) {
            let d = lipschitz * (xi - self.bounds.clamp(xi - gi / lipschitz));
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Gershgorin upper bound on the largest eigenvalue.
    pub fn lipschitz_bound(&self) -> f64 {
        self.hessian
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Runs projected gradient descent from `start` (or the projection of the
/// origin) until the gradient-map norm is at most [`ORACLE_TOL`].
pub fn oracle_block_min(block: &QuadraticBlock, start: Option<&Matrix>) -> Result<Matrix, BcdError> {
    oracle_block_min_with(block, start, ORACLE_TOL, ORACLE_MAX_ITERS)
}

pub fn oracle_block_min_with(
    block: &QuadraticBlock,
    start: Option<&Matrix>,
    tol: f64,
    max_iters: usize,
) -> Result<Matrix, BcdError> {
    let lip = block.lipschitz_bound();
    let step = 1.0 / lip;
    let bounds = block.bounds;
    let mut x = match start {
        Some(s) => s.mapv(|v| bounds.clamp(v)),
        None => Matrix::zeros(block.linear.dim()).mapv(|v| bounds.clamp(v)),
    };
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let g = block.gradient(&x);
        let mut acc = 0.0;
        ndarray::Zip::from(&mut x).and(&g).for_each(|xi, &gi| {
            let next = bounds.clamp(*xi - step * gi);
            let d = lip * (*xi - next);
            acc += d * d;
            *xi = next;
        });
        residual = acc.sqrt();
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(BcdError::OracleMaxIterations { iterations: max_iters, residual })
}
