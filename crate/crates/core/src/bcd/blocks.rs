//! Closed-form minimizers of the individual block subproblems.
//!
//! Each function reads the current [`TrainState`] and returns the proximal
//! point `x*` of its block; none of them mutates the state. Throughout,
//! `t_ℓ` is the layer target (`a_ℓ − u_ℓ − skip_ℓ`, or `Y` for the output
//! layer), so the coupling term of layer `ℓ` is `(γ_ℓ/2)‖W_ℓ a_{ℓ−1} + b_ℓ 𝟙ᵀ − t_ℓ‖²`.

use std::borrow::Cow;

use ndarray::Axis;

use super::hyper::{activation_block, weight_block, ActivationUpdate, Hyperparams};
use super::oracle::{oracle_block_min, QuadraticBlock};
use super::{BcdError, Problem, TrainState};
use crate::model::eval_reg;
use crate::numerics::{add_column, frobenius_sq, gram, row_sums, spd_solve, spd_solve_right, Matrix, SpdMatrix, Vector};
use crate::prox::project_in_place;

/// `t_ℓ`: the matrix layer `ℓ`'s affine map is pulled towards.
pub fn layer_target<'a>(problem: &Problem<'a>, state: &'a TrainState, layer: usize) -> Cow<'a, Matrix> {
    let spec = problem.spec;
    if layer == spec.hidden_layers() + 1 {
        return Cow::Borrowed(&problem.data.y);
    }
    let mut t = state.lifted.act(layer) - state.lifted.aux(layer);
    if spec.has_skip(layer) {
        t -= &problem.data.x;
    }
    Cow::Owned(t)
}

/// `λ` of a `(λ/2)‖W‖²` regularizer; other regularizers have no closed form.
pub fn weight_decay(problem: &Problem<'_>, layer: usize) -> Result<f64, BcdError> {
    problem
        .spec
        .regularizer(layer)
        .weight_decay()
        .ok_or(BcdError::UnsupportedRegularizer { layer })
}

/// Weight update of layer `ℓ ∈ 1..=L+1` given `Σ_j a_{ℓ−1,j} a_{ℓ−1,j}ᵀ`:
///
/// `W* ((α + λ) I + γ G) = α W_old + γ (t − b 𝟙ᵀ) a_{ℓ−1}ᵀ`.
pub(crate) fn weights_with_gram(
    problem: &Problem<'_>,
    state: &TrainState,
    hp: &Hyperparams,
    layer: usize,
    input_gram: &Matrix,
) -> Result<Matrix, BcdError> {
    let l = problem.spec.hidden_layers();
    let alpha = hp.alpha(weight_block(l, layer));
    let gamma = hp.gamma(layer);
    let lambda = weight_decay(problem, layer)?;
    let input = state.lifted.input_to(layer, &problem.data.x);
    let w_old = state.params.weight(layer);
    let b_old = state.params.bias(layer);

    let mut resid = layer_target(problem, state, layer).into_owned();
    resid -= &b_old.view().insert_axis(Axis(1));
    let mut rhs = resid.dot(&input.t());
    rhs *= gamma;
    rhs.scaled_add(alpha, w_old);

    let system = SpdMatrix::regularized(input_gram, gamma, alpha + lambda)?;
    Ok(spd_solve_right(&system, &rhs)?)
}

/// Weight update of any layer `ℓ ∈ 1..=L+1`.
pub fn solve_layer_weights(
    problem: &Problem<'_>,
    state: &TrainState,
    hp: &Hyperparams,
    layer: usize,
) -> Result<Matrix, BcdError> {
    let g = gram(state.lifted.input_to(layer, &problem.data.x));
    weights_with_gram(problem, state, hp, layer, &g)
}

/// `b* = (α b_old + γ Σ_j (t_j − W a_{ℓ−1,j})) / (γ N + α)`, with the
/// layer's current `W`.
pub fn solve_layer_bias(
    problem: &Problem<'_>,
    state: &TrainState,
    hp: &Hyperparams,
    layer: usize,
) -> Result<Vector, BcdError> {
    let l = problem.spec.hidden_layers();
    let alpha = hp.alpha(weight_block(l, layer));
    let gamma = hp.gamma(layer);
    let input = state.lifted.input_to(layer, &problem.data.x);
    let n = problem.data.len() as f64;

    let mut resid = layer_target(problem, state, layer).into_owned();
    resid -= &state.params.weight(layer).dot(input);
    let mut b = row_sums(&resid) * gamma;
    b.scaled_add(alpha, state.params.bias(layer));
    b /= gamma * n + alpha;
    Ok(b)
}

pub fn solve_output_weights(problem: &Problem<'_>, state: &TrainState, hp: &Hyperparams) -> Result<Matrix, BcdError> {
    solve_layer_weights(problem, state, hp, problem.spec.hidden_layers() + 1)
}

pub fn solve_output_bias(problem: &Problem<'_>, state: &TrainState, hp: &Hyperparams) -> Result<Vector, BcdError> {
    solve_layer_bias(problem, state, hp, problem.spec.hidden_layers() + 1)
}

fn check_hidden(problem: &Problem<'_>, layer: usize) -> Result<(), BcdError> {
    let l = problem.spec.hidden_layers();
    if layer == 0 || layer > l {
        return Err(BcdError::InvalidLayer { layer, hidden_layers: l });
    }
    Ok(())
}

pub fn solve_hidden_weights(
    problem: &Problem<'_>,
    state: &TrainState,
    hp: &Hyperparams,
    layer: usize,
) -> Result<Matrix, BcdError> {
    check_hidden(problem, layer)?;
    solve_layer_weights(problem, state, hp, layer)
}

pub fn solve_hidden_bias(
    problem: &Problem<'_>,
    state: &TrainState,
    hp: &Hyperparams,
    layer: usize,
) -> Result<Vector, BcdError> {
    check_hidden(problem, layer)?;
    solve_layer_bias(problem, state, hp, layer)
}

/// `u*_ℓ = a_ℓ − (W_ℓ a_{ℓ−1} + b_ℓ 𝟙ᵀ + skip_ℓ)`, which zeroes the layer's penalty.
pub fn solve_auxiliary(problem: &Problem<'_>, state: &TrainState, layer: usize) -> Result<Matrix, BcdError> {
    check_hidden(problem, layer)?;
    let input = state.lifted.input_to(layer, &problem.data.x);
    let mut u = state.lifted.act(layer) - &state.params.affine(layer, input);
    if problem.spec.has_skip(layer) {
        u -= &problem.data.x;
    }
    Ok(u)
}

/// The quadratic in `a_ℓ` (identical for every column):
///
/// `H = γ_{ℓ+1} W_{ℓ+1}ᵀ W_{ℓ+1} + (α + γ_ℓ) I`,
/// `R = γ_{ℓ+1} W_{ℓ+1}ᵀ (t_{ℓ+1} − b_{ℓ+1} 𝟙ᵀ) + γ_ℓ c + α a_old`,
/// `c = W_ℓ a_{ℓ−1} + b_ℓ 𝟙ᵀ + skip_ℓ + u_ℓ`.
pub struct ActivationSystem {
    pub hessian: SpdMatrix,
    pub rhs: Matrix,
    /// `t_{ℓ+1} − b_{ℓ+1} 𝟙ᵀ`
    upper_target: Matrix,
    /// `c`
    lower_anchor: Matrix,
    gamma_upper: f64,
    gamma_lower: f64,
    layer: usize,
}

impl ActivationSystem {
    pub fn new(problem: &Problem<'_>, state: &TrainState, hp: &Hyperparams, layer: usize) -> Result<Self, BcdError> {
        check_hidden(problem, layer)?;
        let l = problem.spec.hidden_layers();
        let alpha = hp.alpha(activation_block(l, layer));
        let gamma_upper = hp.gamma(layer + 1);
        let gamma_lower = hp.gamma(layer);
        let w_next = state.params.weight(layer + 1);
        let a_old = state.lifted.act(layer);

        let mut upper_target = layer_target(problem, state, layer + 1).into_owned();
        upper_target -= &state.params.bias(layer + 1).view().insert_axis(Axis(1));

        let input = state.lifted.input_to(layer, &problem.data.x);
        let mut lower_anchor = state.params.affine(layer, input);
        if problem.spec.has_skip(layer) {
            lower_anchor += &problem.data.x;
        }
        lower_anchor += state.lifted.aux(layer);

        let mut rhs = w_next.t().dot(&upper_target);
        rhs *= gamma_upper;
        rhs.scaled_add(gamma_lower, &lower_anchor);
        rhs.scaled_add(alpha, a_old);

        let hessian = SpdMatrix::regularized(&gram(&w_next.t().to_owned()), gamma_upper, alpha + gamma_lower)?;
        Ok(ActivationSystem { hessian, rhs, upper_target, lower_anchor, gamma_upper, gamma_lower, layer })
    }

    /// Unconstrained minimizer, one batched solve for all columns.
    pub fn solve_unconstrained(&self) -> Result<Matrix, BcdError> {
        Ok(spd_solve(&self.hessian, &self.rhs)?)
    }

    pub fn as_quadratic_block(&self, problem: &Problem<'_>) -> QuadraticBlock {
        QuadraticBlock {
            hessian: self.hessian.as_matrix().clone(),
            linear: self.rhs.clone(),
            bounds: problem.spec.activation.interval(),
        }
    }

    /// The part of `F̃` that depends on `a_ℓ`, evaluated at `a`
    /// (excluding the indicator).
    pub fn coupling_objective(&self, state: &TrainState, a: &Matrix) -> f64 {
        let w_next = state.params.weight(self.layer + 1);
        let upper = w_next.dot(a) - &self.upper_target;
        let lower = a - &self.lower_anchor;
        0.5 * self.gamma_upper * frobenius_sq(&upper) + 0.5 * self.gamma_lower * frobenius_sq(&lower)
    }
}

/// Activation update: solve the quadratic, then project every column onto
/// the feasible set (or, in [`ActivationUpdate::Exact`] mode, minimize the
/// constrained quadratic exactly).
pub fn solve_activation(
    problem: &Problem<'_>,
    state: &TrainState,
    hp: &Hyperparams,
    layer: usize,
) -> Result<Matrix, BcdError> {
    let system = ActivationSystem::new(problem, state, hp, layer)?;
    solve_activation_with(problem, &system, hp.activation_update)
}

pub(crate) fn solve_activation_with(
    problem: &Problem<'_>,
    system: &ActivationSystem,
    mode: ActivationUpdate,
) -> Result<Matrix, BcdError> {
    let mut a = system.solve_unconstrained()?;
    project_in_place(problem.spec.activation, &mut a);
    match mode {
        ActivationUpdate::SolveThenProject => Ok(a),
        ActivationUpdate::Exact => {
            if problem.spec.activation.interval().is_unbounded() {
                return Ok(a);
            }
            oracle_block_min(&system.as_quadratic_block(problem), Some(&a))
        }
    }
}

/// `(γ_ℓ/2)‖W a_{ℓ−1} + b 𝟙ᵀ − t_ℓ‖² + r_ℓ(W)`: the part of `F̃` that
/// depends on layer `ℓ`'s weights and bias.
pub fn layer_objective(
    problem: &Problem<'_>,
    state: &TrainState,
    hp: &Hyperparams,
    layer: usize,
    w: &Matrix,
    b: &Vector,
) -> f64 {
    let input = state.lifted.input_to(layer, &problem.data.x);
    let mut r = add_column(&w.dot(input), b);
    r -= layer_target(problem, state, layer).as_ref();
    0.5 * hp.gamma(layer) * frobenius_sq(&r) + eval_reg(problem.spec.regularizer(layer), w)
}
