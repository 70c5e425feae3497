//! The training driver behind the command-line tool.

use std::path::{Path, PathBuf};

use crate::bcd::{self, Hyperparams};
use crate::config::{DatasetKind, Optimizer, RunConfig};
use crate::data::{load_cifar10, load_csv, load_idx, make_blobs, DataError};
use crate::error::{Error, Result};
use crate::metrics::TrainMetrics;
use crate::model::{Dataset, NetworkSpec, Params, RegKind};
use crate::numerics::RngStream;
use crate::sgd::{sgd_train, SgdConfig};

pub const MNIST_FILES: [&str; 4] =
    ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"];
pub const CIFAR_TRAIN_FILES: [&str; 5] =
    ["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"];
pub const CIFAR_TEST_FILE: &str = "test_batch.bin";

/// Widths of the hidden layers when `layers` is not given.
const DEFAULT_HIDDEN: [usize; 2] = [32, 32];

// Substreams of the run seed for synthetic data.
const BLOBS_TRAIN_STREAM: u64 = 1;
const BLOBS_TEST_STREAM: u64 = 2;

#[derive(Debug)]
pub struct RunOutcome {
    pub spec: NetworkSpec,
    pub params: Params,
    pub metrics: TrainMetrics,
    pub train_size: usize,
    pub test_size: usize,
}

impl RunOutcome {
    /// One line for the end of a run.
    pub fn summary(&self, cfg: &RunConfig) -> String {
        match self.metrics.last() {
            Some(r) => format!(
                "{} {} epochs on {} samples: F_tilde {} train_acc {:.4} test_acc {:.4} ({:.1} s)",
                cfg.optimizer, r.epoch, self.train_size, r.f_tilde, r.train_acc, r.test_acc, r.seconds
            ),
            None => format!("{} 0 epochs on {} samples", cfg.optimizer, self.train_size),
        }
    }
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        })
    }
}

fn cifar_dir(dir: &Path) -> PathBuf {
    // The official archive unpacks into this subdirectory.
    let nested = dir.join("cifar-10-batches-bin");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

/// Training and optional test set, after `train_limit` / `test_limit`.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Option<Dataset>)> {
    let dir = cfg.data_dir.as_deref();
    let (train, test) = match cfg.dataset {
        DatasetKind::Mnist => {
            let dir = dir.expect("validated");
            let [ti, tl, si, sl] = MNIST_FILES.map(|f| dir.join(f));
            let train = load_idx(&existing(ti)?, &existing(tl)?)?;
            let test = load_idx(&existing(si)?, &existing(sl)?)?;
            (train, Some(test))
        }
        DatasetKind::Cifar10 => {
            let dir = cifar_dir(dir.expect("validated"));
            let batches = CIFAR_TRAIN_FILES.iter().map(|f| existing(dir.join(f))).collect::<Result<Vec<_>>>()?;
            let train = load_cifar10(&batches)?;
            let test = load_cifar10(&[existing(dir.join(CIFAR_TEST_FILE))?])?;
            (train, Some(test))
        }
        DatasetKind::Csv => {
            let classes = cfg.classes.expect("validated");
            let load = |path: &Path| -> Result<Dataset> {
                let path = existing(path.to_path_buf())?;
                let label = match cfg.label_column {
                    Some(c) => c,
                    None => last_column(&path)?,
                };
                Ok(load_csv(&path, label, classes)?)
            };
            let train = load(cfg.train_csv.as_deref().expect("validated"))?;
            let test = cfg.test_csv.as_deref().map(load).transpose()?;
            (train, test)
        }
        DatasetKind::Blobs => {
            let b = &cfg.blobs;
            let root = RngStream::new(cfg.seed);
            let train = make_blobs(b.per_class, b.classes, b.dim, b.spread, &mut root.substream(BLOBS_TRAIN_STREAM))?;
            let test = make_blobs(b.per_class, b.classes, b.dim, b.spread, &mut root.substream(BLOBS_TEST_STREAM))?;
            (train, Some(test))
        }
    };
    let limit = |d: Dataset, n: Option<usize>| match n {
        Some(n) if n < d.len() => d.head(n),
        _ => d,
    };
    Ok((limit(train, cfg.train_limit), test.map(|t| limit(t, cfg.test_limit))))
}

fn last_column(path: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let first = text.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| {
        DataError::Invalid(format!("{}: no rows", path.display()))
    })?;
    Ok(first.split(',').count() - 1)
}

/// The network for `cfg` on `data`; widths must match the data.
pub fn build_spec(cfg: &RunConfig, data: &Dataset) -> Result<NetworkSpec> {
    let layers = match &cfg.layers {
        Some(l) => l.clone(),
        None => std::iter::once(data.dim()).chain(DEFAULT_HIDDEN).chain([data.classes()]).collect(),
    };
    if layers[0] != data.dim() || *layers.last().unwrap() != data.classes() {
        return Err(crate::config::ConfigError::Inconsistent(format!(
            "layers {layers:?} do not match data with {} features and {} classes",
            data.dim(),
            data.classes()
        ))
        .into());
    }
    let mut spec = NetworkSpec::new(layers, cfg.activation)?;
    if let Some(layer) = cfg.residual_into {
        spec = spec.with_residual(layer)?;
    }
    if cfg.lambda > 0.0 {
        spec = spec.with_regularizer(RegKind::SquaredL2(cfg.lambda))?;
    }
    Ok(spec)
}

pub fn build_hyperparams(cfg: &RunConfig, spec: &NetworkSpec) -> Hyperparams {
    let o = &cfg.bcd;
    let mut hp = Hyperparams::uniform(spec, o.gamma, o.alpha_odd, o.alpha_even, o.beta0);
    if let Some(a) = o.alpha_output {
        hp = hp.with_output_alpha(a);
    }
    hp.s = o.s;
    hp.t = o.t;
    hp.momentum = o.momentum;
    hp.epochs = cfg.epochs;
    hp
}

pub fn sgd_config(cfg: &RunConfig) -> SgdConfig {
    SgdConfig { learning_rate: cfg.sgd.lr, batch_size: cfg.sgd.batch_size, epochs: cfg.epochs, shuffle_seed: cfg.seed }
}

/// Comment lines written above the metrics header.
pub fn metrics_comments(cfg: &RunConfig, spec: &NetworkSpec) -> Vec<String> {
    let mut lines = vec![
        format!("optimizer={} dataset={:?} seed={}", cfg.optimizer, cfg.dataset, cfg.seed).to_lowercase(),
        format!(
            "layers={} activation={}",
            spec.layer_dims.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            spec.activation
        ),
    ];
    match cfg.dataset {
        DatasetKind::Mnist | DatasetKind::Cifar10 => lines.push("preprocessing: pixels divided by 255 into [0, 1]".into()),
        DatasetKind::Csv => lines.push("preprocessing: none".into()),
        DatasetKind::Blobs => {}
    }
    match cfg.optimizer {
        Optimizer::Bcd => lines.push(format!(
            "gamma={} alpha_odd={} alpha_even={} alpha_output={} beta0={} s={} t={} momentum={}",
            cfg.bcd.gamma,
            cfg.bcd.alpha_odd,
            cfg.bcd.alpha_even,
            cfg.bcd.alpha_output.unwrap_or(cfg.bcd.alpha_odd),
            cfg.bcd.beta0,
            cfg.bcd.s,
            cfg.bcd.t,
            cfg.bcd.momentum
        )),
        Optimizer::Sgd => lines.push(format!(
            "lr={} batch_size={} (F_tilde and F both report the training loss)",
            cfg.sgd.lr, cfg.sgd.batch_size
        )),
    }
    lines
}

/// Loads data and trains, without writing anything.
pub fn train(cfg: &RunConfig) -> Result<RunOutcome> {
    let (data, test) = load_data(cfg)?;
    let spec = build_spec(cfg, &data)?;
    let mut init_rng = RngStream::new(cfg.seed);
    let (params, metrics) = match cfg.optimizer {
        Optimizer::Bcd => bcd::train(&spec, &data, test.as_ref(), &build_hyperparams(cfg, &spec), &mut init_rng)?,
        Optimizer::Sgd => sgd_train(&spec, &data, test.as_ref(), &sgd_config(cfg), &mut init_rng)?,
    };
    Ok(RunOutcome { spec, params, metrics, train_size: data.len(), test_size: test.map_or(0, |t| t.len()) })
}

/// Trains and then writes the metrics CSV. Nothing is written if any step fails.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let outcome = train(cfg)?;
    let text = outcome.metrics.to_csv(&metrics_comments(cfg, &outcome.spec), cfg.timing);
    write_atomic(&cfg.metrics_out, &text)?;
    Ok(outcome)
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io { path: path.display().to_string(), source };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
