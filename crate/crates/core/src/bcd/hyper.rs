//! Hyperparameters and the block numbering used by the momentum rule.
//!
//! Blocks are numbered `i = 1..=2L+1`: the weight/bias pair of layer `ℓ`
//! (including the output layer `ℓ = L+1`) is block `2(L-ℓ+1)+1`, and the
//! activations of hidden layer `ℓ` are block `2(L-ℓ+1)`. The output layer
//! is therefore block 1 and odd blocks are always weight blocks.

use super::BcdError;
use crate::model::NetworkSpec;

/// Index of the weight/bias block of layer `ℓ ∈ 1..=L+1`.
pub fn weight_block(hidden_layers: usize, layer: usize) -> usize {
    2 * (hidden_layers + 1 - layer) + 1
}

/// Index of the activation block of hidden layer `ℓ ∈ 1..=L`.
pub fn activation_block(hidden_layers: usize, layer: usize) -> usize {
    2 * (hidden_layers + 1 - layer)
}

/// How the activation block is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivationUpdate {
    /// Solve the unconstrained quadratic, then project onto the feasible set.
    #[default]
    SolveThenProject,
    /// Exact constrained minimizer via projected gradient descent.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// `γ_1, ..., γ_{L+1}`.
    pub gamma: Vec<f64>,
    /// Proximal weights `α_1, ..., α_{2L+1}`, constant across sweeps.
    pub alpha: Vec<f64>,
    /// `(a_i, A_i)` with `a_i ≤ α_i ≤ A_i`, checked every sweep.
    pub alpha_bounds: Vec<(f64, f64)>,
    /// Initial momentum `β_i^{(0)}` per block.
    pub beta0: Vec<f64>,
    /// Momentum growth control: `β ← min(β/s, 1)`.
    pub s: f64,
    /// Momentum shrink factor: `β ← tβ`.
    pub t: f64,
    /// When false every extrapolation uses `β = 1` and the rule is skipped.
    pub momentum: bool,
    pub activation_update: ActivationUpdate,
    pub epochs: usize,
}

impl Hyperparams {
    /// Same `γ` for every layer, `α` by block parity (`alpha_odd` for weight
    /// blocks, `alpha_even` for activation blocks) and the same `β^{(0)}`.
    pub fn uniform(spec: &NetworkSpec, gamma: f64, alpha_odd: f64, alpha_even: f64, beta0: f64) -> Self {
        let l = spec.hidden_layers();
        let blocks = 2 * l + 1;
        let alpha: Vec<f64> =
            (1..=blocks).map(|i| if i % 2 == 1 { alpha_odd } else { alpha_even }).collect();
        Hyperparams {
            gamma: vec![gamma; l + 1],
            alpha_bounds: alpha.iter().map(|&a| (a, a)).collect(),
            alpha,
            beta0: vec![beta0; blocks],
            s: 1.0,
            t: 0.1,
            momentum: true,
            activation_update: ActivationUpdate::SolveThenProject,
            epochs: 20,
        }
    }

    /// Overrides `α_1`, the output-layer block.
    pub fn with_output_alpha(mut self, alpha: f64) -> Self {
        self.alpha[0] = alpha;
        self.alpha_bounds[0] = (alpha, alpha);
        self
    }

    pub fn blocks(&self) -> usize {
        self.alpha.len()
    }

    pub fn gamma(&self, layer: usize) -> f64 {
        self.gamma[layer - 1]
    }

    /// `α_i` for 1-based block `i`.
    pub fn alpha(&self, block: usize) -> f64 {
        self.alpha[block - 1]
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<(), BcdError> {
        let l = spec.hidden_layers();
        let blocks = 2 * l + 1;
        let bad = |msg: String| Err(BcdError::InvalidHyperparams(msg));
        if self.gamma.len() != l + 1 {
            return bad(format!("expected {} penalty weights, got {}", l + 1, self.gamma.len()));
        }
        if self.alpha.len() != blocks || self.alpha_bounds.len() != blocks || self.beta0.len() != blocks {
            return bad(format!("expected {blocks} proximal weights, bounds and momenta"));
        }
        if let Some(g) = self.gamma.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
            return bad(format!("penalty weight {g} must be positive"));
        }
        if let Some(&(lo, hi)) = self.alpha_bounds.iter().find(|&&(lo, hi)| !(lo > 0.0 && lo <= hi && hi.is_finite())) {
            return bad(format!("proximal bounds ({lo}, {hi}) must satisfy 0 < a ≤ A < ∞"));
        }
        if let Some(b) = self.beta0.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return bad(format!("initial momentum {b} must lie in (0, 1)"));
        }
        for (name, v) in [("s", self.s), ("t", self.t)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1]"));
            }
        }
        self.check_alpha_bounds()
    }

    /// `a_i ≤ α_i ≤ A_i` for every block.
    pub fn check_alpha_bounds(&self) -> Result<(), BcdError> {
        for (i, (&alpha, &(lo, hi))) in self.alpha.iter().zip(&self.alpha_bounds).enumerate() {
            if !(alpha >= lo && alpha <= hi) {
                return Err(BcdError::AlphaOutOfBounds { block: i + 1, alpha, lo, hi });
            }
        }
        Ok(())
    }
}

/// Current momentum `β_i^{(k)}` for each block.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub beta: Vec<f64>,
}

impl MomentumState {
    pub fn new(hp: &Hyperparams) -> Self {
        MomentumState { beta: hp.beta0.clone() }
    }

    pub fn get(&self, block: usize) -> f64 {
        self.beta[block - 1]
    }

    pub fn set(&mut self, block: usize, beta: f64) {
        self.beta[block - 1] = beta;
    }
}
