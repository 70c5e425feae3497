//! Network specification, parameters, the lifted state, and evaluation of
//! the training objective `F` and its lifted counterpart `F̃`.
//!
//! Layers are numbered `ℓ = 1..=L+1` in the public API (layer `L+1` is the
//! linear output layer); the storage vectors are zero-based, so layer `ℓ`
//! lives at index `ℓ - 1`.
//!
//! With `t_ℓ = a_ℓ - u_ℓ - skip_ℓ` for hidden layers and `t_{L+1} = Y`,
//!
//! ```text
//! F̃ = Σ_{ℓ=1}^{L+1} (γ_ℓ/2) ‖W_ℓ a_{ℓ-1} + b_ℓ 𝟙ᵀ - t_ℓ‖²_F + Σ_ℓ r_ℓ(W_ℓ) + Σ_ℓ ι_S(a_ℓ)
//! ```
//!
//! and the output-layer term is exactly `γ_{L+1}` times the squared loss.

use ndarray::Axis;
use thiserror::Error;

use crate::numerics::{frobenius_sq, gaussian_matrix, Matrix, RngStream, Vector};
use crate::prox::{forward_activation, ActivationKind};

/// Absolute per-coordinate slack for the feasibility indicator.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Standard deviation of the initial weights.
pub const INIT_WEIGHT_STD: f64 = 0.01;
/// Value of every initial bias entry.
pub const INIT_BIAS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    /// `L(z; y) = ½‖z - y‖²`.
    #[default]
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RegKind {
    #[default]
    None,
    /// `(λ/2)‖W‖²_F`
    SquaredL2(f64),
    /// `λ Σ|w|`
    L1(f64),
    /// `λ1 Σ|w| + (λ2/2)‖W‖²_F`
    ElasticNet(f64, f64),
}

impl RegKind {
    fn validate(&self) -> Result<(), ModelError> {
        let ok = match *self {
            RegKind::None => true,
            RegKind::SquaredL2(l) | RegKind::L1(l) => l >= 0.0,
            RegKind::ElasticNet(l1, l2) => l1 >= 0.0 && l2 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidSpec(format!("negative regularization weight in {self:?}")))
        }
    }

    /// The weight-decay coefficient when the regularizer is smooth
    /// (`None` or `SquaredL2`), `None` otherwise.
    pub fn weight_decay(&self) -> Option<f64> {
        match *self {
            RegKind::None => Some(0.0),
            RegKind::SquaredL2(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// `d_0, d_1, ..., d_{L+1}`; the last entry is the number of classes.
    pub layer_dims: Vec<usize>,
    pub activation: ActivationKind,
    /// Layer `r` whose pre-activation receives the input `x` as a skip term.
    pub residual_into: Option<usize>,
    pub loss: LossKind,
    /// One regularizer per layer, `ℓ = 1..=L+1`.
    pub regularizers: Vec<RegKind>,
}

impl NetworkSpec {
    pub fn new(layer_dims: Vec<usize>, activation: ActivationKind) -> Result<Self, ModelError> {
        let n_layers = layer_dims.len().saturating_sub(1);
        let spec = NetworkSpec {
            layer_dims,
            activation,
            residual_into: None,
            loss: LossKind::Squared,
            regularizers: vec![RegKind::None; n_layers],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_residual(mut self, layer: usize) -> Result<Self, ModelError> {
        self.residual_into = Some(layer);
        self.validate()?;
        Ok(self)
    }

    /// Applies `reg` to every layer.
    pub fn with_regularizer(mut self, reg: RegKind) -> Result<Self, ModelError> {
        self.regularizers = vec![reg; self.layer_dims.len() - 1];
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layer_dims.len() < 3 {
            return Err(ModelError::InvalidSpec(
                "need an input width, at least one hidden layer and an output width".into(),
            ));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(ModelError::InvalidSpec("layer widths must be positive".into()));
        }
        if self.regularizers.len() != self.layer_dims.len() - 1 {
            return Err(ModelError::InvalidSpec(format!(
                "expected {} regularizers, got {}",
                self.layer_dims.len() - 1,
                self.regularizers.len()
            )));
        }
        for r in &self.regularizers {
            r.validate()?;
        }
        if let Some(r) = self.residual_into {
            let l = self.hidden_layers();
            if r < 2 || r > l {
                return Err(ModelError::InvalidSpec(format!(
                    "residual layer {r} must lie in 2..={l}"
                )));
            }
            if self.layer_dims[r] != self.layer_dims[0] {
                return Err(ModelError::InvalidSpec(format!(
                    "residual layer {r} has width {} but the input has width {}",
                    self.layer_dims[r], self.layer_dims[0]
                )));
            }
        }
        Ok(())
    }

    /// `L`, the number of hidden layers.
    pub fn hidden_layers(&self) -> usize {
        self.layer_dims.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Width `d_ℓ`.
    pub fn width(&self, layer: usize) -> usize {
        self.layer_dims[layer]
    }

    pub fn regularizer(&self, layer: usize) -> RegKind {
        self.regularizers[layer - 1]
    }

    pub fn has_skip(&self, layer: usize) -> bool {
        self.residual_into == Some(layer)
    }
}

/// Weights `W_ℓ ∈ ℝ^{d_ℓ×d_{ℓ-1}}` and biases `b_ℓ ∈ ℝ^{d_ℓ}`, `ℓ = 1..=L+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
}

impl Params {
    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer - 1]
    }

    pub fn bias(&self, layer: usize) -> &Vector {
        &self.biases[layer - 1]
    }

    pub fn check(&self, spec: &NetworkSpec) -> Result<(), ModelError> {
        let n = spec.layer_dims.len() - 1;
        if self.weights.len() != n || self.biases.len() != n {
            return Err(ModelError::ShapeMismatch(format!(
                "expected {n} layers of parameters, got {} weights and {} biases",
                self.weights.len(),
                self.biases.len()
            )));
        }
        for layer in 1..=n {
            let want = (spec.width(layer), spec.width(layer - 1));
            if self.weight(layer).dim() != want || self.bias(layer).len() != want.0 {
                return Err(ModelError::ShapeMismatch(format!(
                    "layer {layer}: expected W {}x{} and b {}, got W {:?} and b {}",
                    want.0,
                    want.1,
                    want.0,
                    self.weight(layer).dim(),
                    self.bias(layer).len()
                )));
            }
        }
        Ok(())
    }

    /// `W_ℓ input + b_ℓ 𝟙ᵀ`.
    pub fn affine(&self, layer: usize, input: &Matrix) -> Matrix {
        let mut z = self.weight(layer).dot(input);
        z += &self.bias(layer).view().insert_axis(Axis(1));
        z
    }
}

/// Activations `a_ℓ` and auxiliary variables `u_ℓ` (`d_ℓ × N`), `ℓ = 1..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub a: Vec<Matrix>,
    pub u: Vec<Matrix>,
}

impl LiftedState {
    pub fn act(&self, layer: usize) -> &Matrix {
        &self.a[layer - 1]
    }

    pub fn aux(&self, layer: usize) -> &Matrix {
        &self.u[layer - 1]
    }

    /// `a_{ℓ-1}`, with `a_0 = x`.
    pub fn input_to<'a>(&'a self, layer: usize, x: &'a Matrix) -> &'a Matrix {
        if layer == 1 {
            x
        } else {
            &self.a[layer - 2]
        }
    }
}

/// Inputs `X` (`d_0 × N`), one-hot targets `Y` (`K × N`) and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self, ModelError> {
        if x.ncols() != labels.len() {
            return Err(ModelError::InvalidDataset(format!(
                "{} samples but {} labels",
                x.ncols(),
                labels.len()
            )));
        }
        if labels.is_empty() || x.nrows() == 0 {
            return Err(ModelError::InvalidDataset("dataset is empty".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
            return Err(ModelError::InvalidDataset(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let y = one_hot(&labels, classes);
        Ok(Dataset { x, y, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn classes(&self) -> usize {
        self.y.nrows()
    }

    /// The first `n` samples (or all of them if there are fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        self.select(&(0..n).collect::<Vec<_>>())
    }

    /// Samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(1), indices),
            y: self.y.select(Axis(1), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> Matrix {
    let mut y = Matrix::zeros((classes, labels.len()));
    for (j, &c) in labels.iter().enumerate() {
        y[[c, j]] = 1.0;
    }
    y
}

/// Gaussian weights with standard deviation 0.01 and biases of 0.1.
pub fn init_params(spec: &NetworkSpec, rng: &mut RngStream) -> Params {
    init_params_with(spec, INIT_WEIGHT_STD, INIT_BIAS, rng)
}

pub fn init_params_with(spec: &NetworkSpec, weight_std: f64, bias: f64, rng: &mut RngStream) -> Params {
    let n = spec.layer_dims.len() - 1;
    let mut weights = Vec::with_capacity(n);
    let mut biases = Vec::with_capacity(n);
    for layer in 1..=n {
        weights.push(gaussian_matrix(spec.width(layer), spec.width(layer - 1), weight_std, rng));
        biases.push(Vector::from_elem(spec.width(layer), bias));
    }
    Params { weights, biases }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `z_ℓ`, `ℓ = 1..=L`.
    pub preacts: Vec<Matrix>,
    /// `a_ℓ = h(z_ℓ)`, `ℓ = 1..=L`.
    pub acts: Vec<Matrix>,
    /// `W_{L+1} a_L + b_{L+1} 𝟙ᵀ`, no activation.
    pub output: Matrix,
}

fn check_input(spec: &NetworkSpec, params: &Params, x: &Matrix) -> Result<(), ModelError> {
    params.check(spec)?;
    if x.nrows() != spec.input_dim() {
        return Err(ModelError::ShapeMismatch(format!(
            "input has {} rows, network expects {}",
            x.nrows(),
            spec.input_dim()
        )));
    }
    Ok(())
}

pub fn forward_pass(spec: &NetworkSpec, params: &Params, x: &Matrix) -> Result<ForwardPass, ModelError> {
    check_input(spec, params, x)?;
    let l = spec.hidden_layers();
    let mut preacts = Vec::with_capacity(l);
    let mut acts: Vec<Matrix> = Vec::with_capacity(l);
    for layer in 1..=l {
        let input = if layer == 1 { x } else { &acts[layer - 2] };
        let mut z = params.affine(layer, input);
        if spec.has_skip(layer) {
            z += x;
        }
        acts.push(forward_activation(spec.activation, &z));
        preacts.push(z);
    }
    let output = params.affine(l + 1, &acts[l - 1]);
    Ok(ForwardPass { preacts, acts, output })
}

/// Network output only.
pub fn predict_output(spec: &NetworkSpec, params: &Params, x: &Matrix) -> Result<Matrix, ModelError> {
    Ok(forward_pass(spec, params, x)?.output)
}

/// Lifted state from one forward pass: `a_ℓ = h(z_ℓ)`, `u_ℓ = a_ℓ - z_ℓ`,
/// so every penalty term vanishes.
pub fn init_lifted(spec: &NetworkSpec, params: &Params, x: &Matrix) -> Result<LiftedState, ModelError> {
    let fp = forward_pass(spec, params, x)?;
    let u = fp.acts.iter().zip(&fp.preacts).map(|(a, z)| a - z).collect();
    Ok(LiftedState { a: fp.acts, u })
}

/// `½ Σ_j ‖output_j - y_j‖²`.
pub fn squared_loss(output: &Matrix, y: &Matrix) -> Result<f64, ModelError> {
    if output.dim() != y.dim() {
        return Err(ModelError::ShapeMismatch(format!(
            "output is {:?} but targets are {:?}",
            output.dim(),
            y.dim()
        )));
    }
    Ok(0.5 * output.iter().zip(y.iter()).map(|(o, t)| (o - t) * (o - t)).sum::<f64>())
}

pub fn eval_reg(kind: RegKind, w: &Matrix) -> f64 {
    let l1 = || w.iter().map(|v| v.abs()).sum::<f64>();
    match kind {
        RegKind::None => 0.0,
        RegKind::SquaredL2(lambda) => 0.5 * lambda * frobenius_sq(w),
        RegKind::L1(lambda) => lambda * l1(),
        RegKind::ElasticNet(l1w, l2w) => l1w * l1() + 0.5 * l2w * frobenius_sq(w),
    }
}

fn total_reg(spec: &NetworkSpec, params: &Params) -> f64 {
    (1..spec.layer_dims.len()).map(|layer| eval_reg(spec.regularizer(layer), params.weight(layer))).sum()
}

/// `γ_{L+1} · squared_loss(W_{L+1} a_L + b_{L+1} 𝟙ᵀ, Y) + Σ_ℓ r_ℓ(W_ℓ)`.
pub fn eval_f(
    spec: &NetworkSpec,
    params: &Params,
    a_last: &Matrix,
    data: &Dataset,
    gamma_out: f64,
) -> Result<f64, ModelError> {
    params.check(spec)?;
    let l = spec.hidden_layers();
    if a_last.nrows() != spec.width(l) || a_last.ncols() != data.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "a_L is {:?}, expected ({}, {})",
            a_last.dim(),
            spec.width(l),
            data.len()
        )));
    }
    let output = params.affine(l + 1, a_last);
    Ok(gamma_out * squared_loss(&output, &data.y)? + total_reg(spec, params))
}

/// `½‖W_ℓ a_{ℓ-1} + b_ℓ 𝟙ᵀ + skip_ℓ - a_ℓ + u_ℓ‖²_F` for a hidden layer, or
/// the squared loss for `ℓ = L+1`. Not scaled by `γ_ℓ`.
pub fn layer_penalty(spec: &NetworkSpec, params: &Params, lifted: &LiftedState, data: &Dataset, layer: usize) -> f64 {
    let input = lifted.input_to(layer, &data.x);
    let mut r = params.affine(layer, input);
    if layer == spec.hidden_layers() + 1 {
        r -= &data.y;
    } else {
        if spec.has_skip(layer) {
            r += &data.x;
        }
        r -= lifted.act(layer);
        r += lifted.aux(layer);
    }
    0.5 * frobenius_sq(&r)
}

fn check_lifted(spec: &NetworkSpec, lifted: &LiftedState, data: &Dataset) -> Result<(), ModelError> {
    let l = spec.hidden_layers();
    if lifted.a.len() != l || lifted.u.len() != l {
        return Err(ModelError::ShapeMismatch(format!("lifted state must have {l} layers")));
    }
    for layer in 1..=l {
        let want = (spec.width(layer), data.len());
        if lifted.act(layer).dim() != want || lifted.aux(layer).dim() != want {
            return Err(ModelError::ShapeMismatch(format!("lifted layer {layer} must be {want:?}")));
        }
    }
    if data.dim() != spec.input_dim() || data.classes() != spec.classes() {
        return Err(ModelError::ShapeMismatch("dataset does not match the network".into()));
    }
    Ok(())
}

/// The lifted objective `F̃`; `+∞` if any activation leaves its feasible set.
///
/// `gammas` holds `γ_1, ..., γ_{L+1}`.
pub fn eval_f_tilde(
    spec: &NetworkSpec,
    params: &Params,
    lifted: &LiftedState,
    data: &Dataset,
    gammas: &[f64],
) -> Result<f64, ModelError> {
    params.check(spec)?;
    check_lifted(spec, lifted, data)?;
    let l = spec.hidden_layers();
    if gammas.len() != l + 1 {
        return Err(ModelError::ShapeMismatch(format!("expected {} penalty weights", l + 1)));
    }
    let iv = spec.activation.interval();
    if lifted.a.iter().any(|a| a.iter().any(|&v| !iv.contains(v, FEASIBILITY_TOL))) {
        return Ok(f64::INFINITY);
    }
    let penalties: f64 = (1..=l + 1)
        .map(|layer| gammas[layer - 1] * layer_penalty(spec, params, lifted, data, layer))
        .sum();
    Ok(penalties + total_reg(spec, params))
}

/// Arg-max class per column; ties go to the smallest index.
pub fn argmax_columns(output: &Matrix) -> Vec<usize> {
    output
        .columns()
        .into_iter()
        .map(|col| {
            let mut best = 0;
            for (i, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

pub fn predict(spec: &NetworkSpec, params: &Params, x: &Matrix) -> Result<Vec<usize>, ModelError> {
    Ok(argmax_columns(&predict_output(spec, params, x)?))
}

pub fn accuracy(spec: &NetworkSpec, params: &Params, data: &Dataset) -> Result<f64, ModelError> {
    let predicted = predict(spec, params, &data.x)?;
    let hits = predicted.iter().zip(&data.labels).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / data.len() as f64)
}
