use std::time::Instant;

use ndarray::{Array, Dimension};

use super::blocks::{layer_objective, solve_activation_with, solve_auxiliary, solve_layer_bias, weights_with_gram, ActivationSystem};
use super::hyper::{activation_block, weight_block, Hyperparams, MomentumState};
use super::{BcdError, Problem, TrainState};
use crate::metrics::{MetricsRow, TrainMetrics};
use crate::model::{accuracy, eval_f, eval_f_tilde, Dataset, NetworkSpec, Params};
use crate::numerics::{gram, Matrix, RngStream};

/// Smallest momentum the shrink rule can produce; keeps `β > 0`.
pub const MOMENTUM_FLOOR: f64 = f64::MIN_POSITIVE;

/// `old + β (star − old)`; returns `star` itself when `β = 1`.
pub fn extrapolate<D: Dimension>(old: &Array<f64, D>, star: &Array<f64, D>, beta: f64) -> Array<f64, D> {
    if beta == 1.0 {
        return star.clone();
    }
    let mut out = star - old;
    out *= beta;
    out += old;
    out
}

/// Shrink `β` by `t` when the plain proximal point is at least as good as
/// the extrapolated one, otherwise grow it by `1/s` up to 1.
pub fn adapt_momentum(beta: f64, f_star: f64, f_extrap: f64, s: f64, t: f64) -> f64 {
    if f_star <= f_extrap {
        (t * beta).max(MOMENTUM_FLOOR)
    } else {
        (beta / s).min(1.0)
    }
}

/// Identifies the block that was just written, for sweep observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockUpdate {
    Weights(usize),
    Bias(usize),
    Activation(usize),
    Auxiliary(usize),
}

/// One full sweep over all blocks.
pub fn sweep(
    problem: &Problem<'_>,
    state: &mut TrainState,
    hp: &Hyperparams,
    momentum: &mut MomentumState,
) -> Result<(), BcdError> {
    let input_gram = gram(&problem.data.x);
    sweep_impl(problem, state, hp, momentum, &input_gram, &mut |_, _| {})
}

fn sweep_impl(
    problem: &Problem<'_>,
    state: &mut TrainState,
    hp: &Hyperparams,
    momentum: &mut MomentumState,
    input_gram: &Matrix,
    observer: &mut dyn FnMut(BlockUpdate, &TrainState),
) -> Result<(), BcdError> {
    hp.check_alpha_bounds()?;
    let l = problem.spec.hidden_layers();
    update_layer(problem, state, hp, momentum, l + 1, input_gram, observer)?;
    for layer in (1..=l).rev() {
        update_activation(problem, state, hp, momentum, layer)?;
        observer(BlockUpdate::Activation(layer), state);
        update_auxiliary(problem, state, layer, observer)?;
        update_layer(problem, state, hp, momentum, layer, input_gram, observer)?;
    }
    Ok(())
}

fn update_auxiliary(
    problem: &Problem<'_>,
    state: &mut TrainState,
    layer: usize,
    observer: &mut dyn FnMut(BlockUpdate, &TrainState),
) -> Result<(), BcdError> {
    state.lifted.u[layer - 1] = solve_auxiliary(problem, state, layer)?;
    observer(BlockUpdate::Auxiliary(layer), state);
    Ok(())
}

fn block_beta(hp: &Hyperparams, momentum: &MomentumState, block: usize) -> f64 {
    if hp.momentum {
        momentum.get(block)
    } else {
        1.0
    }
}

/// Weight then bias of layer `ℓ`, followed by the momentum test for the pair.
fn update_layer(
    problem: &Problem<'_>,
    state: &mut TrainState,
    hp: &Hyperparams,
    momentum: &mut MomentumState,
    layer: usize,
    input_gram: &Matrix,
    observer: &mut dyn FnMut(BlockUpdate, &TrainState),
) -> Result<(), BcdError> {
    let block = weight_block(problem.spec.hidden_layers(), layer);
    let beta = block_beta(hp, momentum, block);
    let idx = layer - 1;

    let w_star = if layer == 1 {
        weights_with_gram(problem, state, hp, layer, input_gram)?
    } else {
        let g = gram(state.lifted.input_to(layer, &problem.data.x));
        weights_with_gram(problem, state, hp, layer, &g)?
    };
    let w_next = extrapolate(&state.params.weights[idx], &w_star, beta);
    state.params.weights[idx] = w_next;
    observer(BlockUpdate::Weights(layer), state);

    let b_star = solve_layer_bias(problem, state, hp, layer)?;
    let b_next = extrapolate(&state.params.biases[idx], &b_star, beta);
    state.params.biases[idx] = b_next;
    observer(BlockUpdate::Bias(layer), state);

    if hp.momentum {
        let f_star = layer_objective(problem, state, hp, layer, &w_star, &b_star);
        let f_extrap =
            layer_objective(problem, state, hp, layer, state.params.weight(layer), state.params.bias(layer));
        momentum.set(block, adapt_momentum(beta, f_star, f_extrap, hp.s, hp.t));
    }
    Ok(())
}

fn update_activation(
    problem: &Problem<'_>,
    state: &mut TrainState,
    hp: &Hyperparams,
    momentum: &mut MomentumState,
    layer: usize,
) -> Result<(), BcdError> {
    let block = activation_block(problem.spec.hidden_layers(), layer);
    let beta = block_beta(hp, momentum, block);
    let system = ActivationSystem::new(problem, state, hp, layer)?;
    let a_star = solve_activation_with(problem, &system, hp.activation_update)?;
    let a_next = extrapolate(state.lifted.act(layer), &a_star, beta);
    if hp.momentum {
        // Both candidates are feasible (a convex combination of feasible
        // points), so the indicator term cancels.
        let f_star = system.coupling_objective(state, &a_star);
        let f_extrap = system.coupling_objective(state, &a_next);
        momentum.set(block, adapt_momentum(beta, f_star, f_extrap, hp.s, hp.t));
    }
    state.lifted.a[layer - 1] = a_next;
    Ok(())
}

/// Owns a training state and runs sweeps over it.
pub struct BcdTrainer<'a> {
    problem: Problem<'a>,
    hp: Hyperparams,
    input_gram: Matrix,
    state: TrainState,
    momentum: MomentumState,
    sweeps: usize,
}

impl<'a> BcdTrainer<'a> {
    pub fn new(problem: Problem<'a>, hp: Hyperparams, state: TrainState) -> Result<Self, BcdError> {
        hp.validate(problem.spec)?;
        for layer in 1..problem.spec.layer_dims.len() {
            super::blocks::weight_decay(&problem, layer)?;
        }
        let momentum = MomentumState::new(&hp);
        Ok(BcdTrainer { input_gram: gram(&problem.data.x), problem, hp, state, momentum, sweeps: 0 })
    }

    pub fn sweep(&mut self) -> Result<(), BcdError> {
        self.sweep_observed(|_, _| {})
    }

    /// Runs one sweep, calling `observer` after every individual block write.
    pub fn sweep_observed<F>(&mut self, mut observer: F) -> Result<(), BcdError>
    where
        F: FnMut(BlockUpdate, &TrainState),
    {
        sweep_impl(&self.problem, &mut self.state, &self.hp, &mut self.momentum, &self.input_gram, &mut observer)?;
        self.sweeps += 1;
        Ok(())
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn momentum(&self) -> &MomentumState {
        &self.momentum
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    /// `F̃` at the current state.
    pub fn objective(&self) -> Result<f64, BcdError> {
        Ok(eval_f_tilde(self.problem.spec, &self.state.params, &self.state.lifted, self.problem.data, &self.hp.gamma)?)
    }

    /// `F` with the current lifted `a_L`.
    pub fn loss_objective(&self) -> Result<f64, BcdError> {
        let l = self.problem.spec.hidden_layers();
        Ok(eval_f(
            self.problem.spec,
            &self.state.params,
            self.state.lifted.act(l),
            self.problem.data,
            self.hp.gamma(l + 1),
        )?)
    }
}

/// Initializes from `rng`, runs `hp.epochs` sweeps, and records one
/// metrics row per sweep.
pub fn train(
    spec: &NetworkSpec,
    data: &Dataset,
    test: Option<&Dataset>,
    hp: &Hyperparams,
    rng: &mut RngStream,
) -> Result<(Params, TrainMetrics), BcdError> {
    let problem = Problem::new(spec, data)?;
    let state = TrainState::init(&problem, rng)?;
    let mut trainer = BcdTrainer::new(problem, hp.clone(), state)?;
    let mut metrics = TrainMetrics::default();
    let start = Instant::now();
    for epoch in 1..=hp.epochs {
        trainer.sweep()?;
        let params = &trainer.state().params;
        let test_acc = match test {
            Some(t) => accuracy(spec, params, t)?,
            None => f64::NAN,
        };
        metrics.rows.push(MetricsRow {
            epoch,
            f_tilde: trainer.objective()?,
            f: trainer.loss_objective()?,
            train_acc: accuracy(spec, params, data)?,
            test_acc,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((trainer.into_state().params, metrics))
}
