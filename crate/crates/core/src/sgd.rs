//! Minibatch SGD on the mean squared loss, with gradients by backpropagation.

use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;

use crate::metrics::{MetricsRow, TrainMetrics};
use crate::model::{accuracy, forward_pass, init_params, squared_loss, Dataset, ModelError, NetworkSpec, Params};
use crate::numerics::{row_sums, Matrix, RngStream, Vector};

/// Substream of `shuffle_seed` used for the epoch permutations.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle_seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { learning_rate: 0.05, batch_size: 128, epochs: 100, shuffle_seed: 0 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidSpec(format!("learning rate {} must be nonnegative", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidSpec("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `∂/∂W_ℓ` and `∂/∂b_ℓ` for `ℓ = 1..=L+1`, stored like [`Params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
}

/// Gradients of `(1/n) Σ_j ½‖output_j − y_j‖²` plus the weight regularizers'
/// gradients (`L1` uses `sign(W)`, zero at 0). Activation derivatives are
/// zero at kinks. The skip path carries the input, which has no parameters,
/// so it only enters through the forward pass.
pub fn backprop_grads(spec: &NetworkSpec, params: &Params, x: &Matrix, y: &Matrix) -> Result<Grads, ModelError> {
    if x.ncols() == 0 {
        return Err(ModelError::ShapeMismatch("empty batch".into()));
    }
    if y.nrows() != spec.classes() || y.ncols() != x.ncols() {
        return Err(ModelError::ShapeMismatch(format!(
            "targets are {:?}, expected ({}, {})",
            y.dim(),
            spec.classes(),
            x.ncols()
        )));
    }
    let fp = forward_pass(spec, params, x)?;
    let l = spec.hidden_layers();
    let n = x.ncols() as f64;
    let mut weights = vec![Matrix::zeros((0, 0)); l + 1];
    let mut biases = vec![Vector::zeros(0); l + 1];

    // delta = ∂loss/∂(pre-activation of the current layer)
    let mut delta = (&fp.output - y) / n;
    for layer in (1..=l + 1).rev() {
        let input = if layer == 1 { x } else { &fp.acts[layer - 2] };
        weights[layer - 1] = delta.dot(&input.t());
        biases[layer - 1] = row_sums(&delta);
        if layer > 1 {
            let mut back = params.weight(layer).t().dot(&delta);
            let z = &fp.preacts[layer - 2];
            ndarray::Zip::from(&mut back).and(z).for_each(|g, &z| *g *= spec.activation.derivative(z));
            delta = back;
        }
    }
    for (layer, w) in weights.iter_mut().enumerate() {
        add_reg_grad(spec, layer + 1, params.weight(layer + 1), w);
    }
    Ok(Grads { weights, biases })
}

fn add_reg_grad(spec: &NetworkSpec, layer: usize, w: &Matrix, grad: &mut Matrix) {
    use crate::model::RegKind;
    let (l1, l2) = match spec.regularizer(layer) {
        RegKind::None => return,
        RegKind::SquaredL2(l2) => (0.0, l2),
        RegKind::L1(l1) => (l1, 0.0),
        RegKind::ElasticNet(l1, l2) => (l1, l2),
    };
    ndarray::Zip::from(grad).and(w).for_each(|g, &w| {
        let sign = if w > 0.0 {
            1.0
        } else if w < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g += l2 * w + l1 * sign;
    });
}

/// `params ← params − lr · grads`.
pub fn apply_step(params: &mut Params, grads: &Grads, lr: f64) {
    for (w, g) in params.weights.iter_mut().zip(&grads.weights) {
        w.scaled_add(-lr, g);
    }
    for (b, g) in params.biases.iter_mut().zip(&grads.biases) {
        b.scaled_add(-lr, g);
    }
}

/// Training loss `½ Σ_j ‖output_j − y_j‖²` of the forward pass.
pub fn training_loss(spec: &NetworkSpec, params: &Params, data: &Dataset) -> Result<f64, ModelError> {
    squared_loss(&forward_pass(spec, params, &data.x)?.output, &data.y)
}

/// Initializes from `rng` and trains for `cfg.epochs` epochs.
pub fn sgd_train(
    spec: &NetworkSpec,
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &SgdConfig,
    rng: &mut RngStream,
) -> Result<(Params, TrainMetrics), ModelError> {
    let params = init_params(spec, rng);
    sgd_train_from(spec, params, data, test, cfg)
}

/// Trains from the given parameters. Each epoch visits a fresh permutation
/// of the samples drawn from `cfg.shuffle_seed`; the last batch may be short.
/// Both objective columns of the metrics hold the training loss.
pub fn sgd_train_from(
    spec: &NetworkSpec,
    mut params: Params,
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &SgdConfig,
) -> Result<(Params, TrainMetrics), ModelError> {
    cfg.validate()?;
    params.check(spec)?;
    let mut shuffle = RngStream::new(cfg.shuffle_seed).substream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut metrics = TrainMetrics::default();
    let start = Instant::now();
    for epoch in 1..=cfg.epochs {
        order.shuffle(shuffle.rng_mut());
        for batch in order.chunks(cfg.batch_size) {
            let x = data.x.select(Axis(1), batch);
            let y = data.y.select(Axis(1), batch);
            let grads = backprop_grads(spec, &params, &x, &y)?;
            apply_step(&mut params, &grads, cfg.learning_rate);
        }
        let loss = training_loss(spec, &params, data)?;
        metrics.rows.push(MetricsRow {
            epoch,
            f_tilde: loss,
            f: loss,
            train_acc: accuracy(spec, &params, data)?,
            test_acc: match test {
                Some(t) => accuracy(spec, &params, t)?,
                None => f64::NAN,
            },
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((params, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::eval_reg;
    use crate::prox::ActivationKind;
    use ndarray::array;

    #[test]
    fn zero_loss_point_has_zero_gradient() {
        let spec = NetworkSpec::new(vec![2, 3, 2], ActivationKind::ReluProjection).unwrap();
        let params = init_params(&spec, &mut RngStream::new(1));
        let x = array![[0.3, -1.0], [2.0, 0.5]];
        let y = forward_pass(&spec, &params, &x).unwrap().output;
        let g = backprop_grads(&spec, &params, &x, &y).unwrap();
        assert!(g.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(g.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn output_layer_gradient_by_hand() {
        // One hidden identity unit fixed at 1 via W_1 = 0, b_1 = 1.
        let spec = NetworkSpec::new(vec![1, 1, 1], ActivationKind::Identity).unwrap();
        let params = Params { weights: vec![array![[0.0]], array![[2.0]]], biases: vec![array![1.0], array![0.5]] };
        let g = backprop_grads(&spec, &params, &array![[3.0]], &array![[1.0]]).unwrap();
        // output 2.5, residual 1.5, input to the output layer 1
        assert_eq!(g.weights[1], array![[1.5]]);
        assert_eq!(g.biases[1], array![1.5]);
        // back through W_2 = 2: delta_1 = 3, input x = 3
        assert_eq!(g.weights[0], array![[9.0]]);
        assert_eq!(g.biases[0], array![3.0]);
    }

    #[test]
    fn regularizer_gradient() {
        let spec = NetworkSpec::new(vec![1, 1, 1], ActivationKind::Identity)
            .unwrap()
            .with_regularizer(crate::model::RegKind::SquaredL2(0.5))
            .unwrap();
        let params = Params { weights: vec![array![[0.0]], array![[2.0]]], biases: vec![array![1.0], array![0.5]] };
        let g = backprop_grads(&spec, &params, &array![[3.0]], &array![[1.0]]).unwrap();
        assert_eq!(g.weights[1], array![[2.5]]);
        assert_eq!(eval_reg(spec.regularizer(2), params.weight(2)), 1.0);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let spec = NetworkSpec::new(vec![2, 4, 2], ActivationKind::HardTanh).unwrap();
        let data = Dataset::new(array![[0.1, 0.9, 0.4], [0.5, 0.2, 0.7]], vec![0, 1, 1], 2).unwrap();
        let init = init_params(&spec, &mut RngStream::new(3));
        let cfg = SgdConfig { learning_rate: 0.0, batch_size: 2, epochs: 3, shuffle_seed: 1 };
        let (params, metrics) = sgd_train_from(&spec, init.clone(), &data, None, &cfg).unwrap();
        assert_eq!(params, init);
        assert_eq!(metrics.rows.len(), 3);
    }

    #[test]
    fn full_batch_step_decreases_loss() {
        let spec = NetworkSpec::new(vec![2, 4, 2], ActivationKind::Identity).unwrap();
        let data = Dataset::new(array![[0.1, 0.9, 0.4], [0.5, 0.2, 0.7]], vec![0, 1, 1], 2).unwrap();
        let init = init_params(&spec, &mut RngStream::new(3));
        let before = training_loss(&spec, &init, &data).unwrap();
        let cfg = SgdConfig { learning_rate: 1e-2, batch_size: 3, epochs: 1, shuffle_seed: 1 };
        let (params, metrics) = sgd_train_from(&spec, init, &data, None, &cfg).unwrap();
        assert!(metrics.rows[0].f < before);
        // one full-batch step equals a single manual step
        let grads = backprop_grads(&spec, &init_params(&spec, &mut RngStream::new(3)), &data.x, &data.y).unwrap();
        let mut manual = init_params(&spec, &mut RngStream::new(3));
        apply_step(&mut manual, &grads, 1e-2);
        assert_eq!(params, manual);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SgdConfig { batch_size: 0, ..SgdConfig::default() }.validate().is_err());
        assert!(SgdConfig { learning_rate: -1.0, ..SgdConfig::default() }.validate().is_err());
    }
}
