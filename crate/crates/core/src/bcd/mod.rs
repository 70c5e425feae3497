//! Proximal block coordinate descent on the lifted objective.
//!
//! One sweep updates, in order: the output weights and bias, then for
//! `ℓ = L, ..., 1` the activations `a_ℓ`, the auxiliary variables `u_ℓ`,
//! and the weights and bias of layer `ℓ`. Every update after the first
//! reads the freshest values of all other blocks.

mod blocks;
mod hyper;
mod oracle;
mod sweep;

use thiserror::Error;

pub use blocks::{
    layer_objective, layer_target, solve_activation, solve_auxiliary, solve_hidden_bias, solve_hidden_weights,
    solve_layer_bias, solve_layer_weights, solve_output_bias, solve_output_weights, weight_decay, ActivationSystem,
};
pub use hyper::{activation_block, weight_block, ActivationUpdate, Hyperparams, MomentumState};
pub use oracle::{oracle_block_min, oracle_block_min_with, QuadraticBlock, ORACLE_MAX_ITERS, ORACLE_TOL};
pub use sweep::{adapt_momentum, extrapolate, sweep, train, BcdTrainer, BlockUpdate, MOMENTUM_FLOOR};

use crate::model::{init_lifted, init_params, Dataset, LiftedState, ModelError, NetworkSpec, Params};
use crate::numerics::{NumericsError, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BcdError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("layer {layer} has a regularizer without a closed-form weight update")]
    UnsupportedRegularizer { layer: usize },
    #[error("layer {layer} is not a hidden layer (L = {hidden_layers})")]
    InvalidLayer { layer: usize, hidden_layers: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("proximal weight α_{block} = {alpha} outside [{lo}, {hi}]")]
    AlphaOutOfBounds { block: usize, alpha: f64, lo: f64, hi: f64 },
    #[error("oracle did not converge in {iterations} iterations (gradient map {residual:e})")]
    OracleMaxIterations { iterations: usize, residual: f64 },
}

/// The network and the training data it is fitted to.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub spec: &'a NetworkSpec,
    pub data: &'a Dataset,
}

impl<'a> Problem<'a> {
    pub fn new(spec: &'a NetworkSpec, data: &'a Dataset) -> Result<Self, ModelError> {
        spec.validate()?;
        if data.dim() != spec.input_dim() || data.classes() != spec.classes() {
            return Err(ModelError::ShapeMismatch(format!(
                "dataset is {}-dimensional with {} classes, network expects {} and {}",
                data.dim(),
                data.classes(),
                spec.input_dim(),
                spec.classes()
            )));
        }
        Ok(Problem { spec, data })
    }
}

/// Everything a sweep updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: Params,
    pub lifted: LiftedState,
}

impl TrainState {
    /// Gaussian weights, constant biases, and `a`, `u` from one forward pass.
    pub fn init(problem: &Problem<'_>, rng: &mut RngStream) -> Result<Self, ModelError> {
        let params = init_params(problem.spec, rng);
        Self::from_params(problem, params)
    }

    pub fn from_params(problem: &Problem<'_>, params: Params) -> Result<Self, ModelError> {
        let lifted = init_lifted(problem.spec, &params, &problem.data.x)?;
        Ok(TrainState { params, lifted })
    }
}
