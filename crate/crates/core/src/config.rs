//! Run configuration: a flat `key = value` file merged with command-line
//! overrides. Keys are the long flag names without the leading dashes;
//! `_` and `-` are interchangeable.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::prox::ActivationKind;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("unknown option `--{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `--{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("`--{key}` does not apply to the {optimizer} optimizer")]
    NotApplicable { key: String, optimizer: Optimizer },
    #[error("missing required option `--{0}`")]
    Missing(String),
    #[error("{0}")]
    Inconsistent(String),
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Bcd,
    Sgd,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Bcd => "bcd",
            Optimizer::Sgd => "sgd",
        })
    }
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bcd" => Ok(Optimizer::Bcd),
            "sgd" => Ok(Optimizer::Sgd),
            _ => Err("expected `bcd` or `sgd`".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Csv,
    Blobs,
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" | "cifar-10" => Ok(DatasetKind::Cifar10),
            "csv" => Ok(DatasetKind::Csv),
            "blobs" => Ok(DatasetKind::Blobs),
            _ => Err("expected one of mnist, cifar10, csv, blobs".into()),
        }
    }
}

/// Synthetic data parameters for `--dataset blobs`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobsConfig {
    pub per_class: usize,
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdOptions {
    pub gamma: f64,
    pub alpha_odd: f64,
    pub alpha_even: f64,
    /// Overrides the output block's `α`; `alpha_odd` otherwise.
    pub alpha_output: Option<f64>,
    pub beta0: f64,
    pub s: f64,
    pub t: f64,
    pub momentum: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOptions {
    pub lr: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub optimizer: Optimizer,
    pub dataset: DatasetKind,
    /// Directory holding the MNIST IDX or CIFAR-10 binary files.
    pub data_dir: Option<PathBuf>,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    /// `None` means the last column.
    pub label_column: Option<usize>,
    /// Class count for CSV data.
    pub classes: Option<usize>,
    pub blobs: BlobsConfig,
    /// Use only the first `n` training / test samples.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Full layer widths `d_0, ..., d_{L+1}`; derived from the data with two
    /// hidden layers of 32 when absent.
    pub layers: Option<Vec<usize>>,
    pub activation: ActivationKind,
    pub residual_into: Option<usize>,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub metrics_out: PathBuf,
    /// Write wall-clock seconds; when false the column is all zeros.
    pub timing: bool,
    pub bcd: BcdOptions,
    pub sgd: SgdOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            optimizer: Optimizer::Bcd,
            dataset: DatasetKind::Blobs,
            data_dir: None,
            train_csv: None,
            test_csv: None,
            label_column: None,
            classes: None,
            blobs: BlobsConfig { per_class: 334, classes: 3, dim: 20, spread: 0.1 },
            train_limit: None,
            test_limit: None,
            layers: None,
            activation: ActivationKind::ReluProjection,
            residual_into: None,
            lambda: 0.0,
            epochs: 20,
            seed: 0,
            metrics_out: PathBuf::from("metrics.csv"),
            timing: true,
            bcd: BcdOptions {
                gamma: 0.1,
                alpha_odd: 5.0,
                alpha_even: 15.0,
                alpha_output: None,
                beta0: 0.95,
                s: 1.0,
                t: 0.1,
                momentum: true,
            },
            sgd: SgdOptions { lr: 0.05, batch_size: 128 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Any,
    Bcd,
    Sgd,
}

const KEYS: &[(&str, Scope)] = &[
    ("optimizer", Scope::Any),
    ("dataset", Scope::Any),
    ("data-dir", Scope::Any),
    ("train-csv", Scope::Any),
    ("test-csv", Scope::Any),
    ("label-column", Scope::Any),
    ("classes", Scope::Any),
    ("blobs-per-class", Scope::Any),
    ("blobs-dim", Scope::Any),
    ("blobs-spread", Scope::Any),
    ("train-limit", Scope::Any),
    ("test-limit", Scope::Any),
    ("layers", Scope::Any),
    ("activation", Scope::Any),
    ("residual-into", Scope::Any),
    ("lambda", Scope::Any),
    ("epochs", Scope::Any),
    ("seed", Scope::Any),
    ("metrics-out", Scope::Any),
    ("timing", Scope::Any),
    ("gamma", Scope::Bcd),
    ("alpha-odd", Scope::Bcd),
    ("alpha-even", Scope::Bcd),
    ("alpha-output", Scope::Bcd),
    ("beta0", Scope::Bcd),
    ("s", Scope::Bcd),
    ("t", Scope::Bcd),
    ("momentum", Scope::Bcd),
    ("lr", Scope::Sgd),
    ("batch-size", Scope::Sgd),
];

fn canonical(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-")
}

fn scope_of(key: &str) -> Option<Scope> {
    KEYS.iter().find(|(k, _)| *k == key).map(|&(_, s)| s)
}

/// Raw `key → value` settings in the order of precedence they were added.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = canonical(key);
        if scope_of(&key).is_none() {
            return Err(ConfigError::UnknownKey(key));
        }
        self.values.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&canonical(key)).map(String::as_str)
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut settings = Settings::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { path: path.to_path_buf(), line: i + 1 });
            };
            if key.trim().is_empty() {
                return Err(ConfigError::Syntax { path: path.to_path_buf(), line: i + 1 });
            }
            settings.set(key, value.trim())?;
        }
        Ok(settings)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
        Self::parse(&text, path)
    }

    /// Values in `overrides` win.
    pub fn merge(&mut self, overrides: Settings) {
        self.values.extend(overrides.values);
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: "expected true or false".into(),
                }),
            })
            .transpose()
    }

    /// Builds a [`RunConfig`] on top of the defaults, rejecting options that
    /// belong to the other optimizer.
    pub fn into_config(self) -> Result<RunConfig, ConfigError> {
        let mut c = RunConfig::default();
        if let Some(v) = self.parsed("optimizer")? {
            c.optimizer = v;
        }
        for key in self.values.keys() {
            let offending = match (scope_of(key), c.optimizer) {
                (Some(Scope::Bcd), Optimizer::Sgd) | (Some(Scope::Sgd), Optimizer::Bcd) => true,
                _ => false,
            };
            if offending {
                return Err(ConfigError::NotApplicable { key: key.clone(), optimizer: c.optimizer });
            }
        }

        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = self.parsed($key)? {
                    $field = v;
                }
            };
            (opt $field:expr, $key:literal) => {
                if let Some(v) = self.parsed($key)? {
                    $field = Some(v);
                }
            };
        }
        set!(c.dataset, "dataset");
        set!(opt c.data_dir, "data-dir");
        set!(opt c.train_csv, "train-csv");
        set!(opt c.test_csv, "test-csv");
        set!(opt c.label_column, "label-column");
        set!(opt c.classes, "classes");
        set!(c.blobs.per_class, "blobs-per-class");
        set!(c.blobs.dim, "blobs-dim");
        set!(c.blobs.spread, "blobs-spread");
        set!(opt c.train_limit, "train-limit");
        set!(opt c.test_limit, "test-limit");
        set!(c.activation, "activation");
        set!(opt c.residual_into, "residual-into");
        set!(c.lambda, "lambda");
        set!(c.epochs, "epochs");
        set!(c.seed, "seed");
        set!(c.metrics_out, "metrics-out");
        set!(c.bcd.gamma, "gamma");
        set!(c.bcd.alpha_odd, "alpha-odd");
        set!(c.bcd.alpha_even, "alpha-even");
        set!(opt c.bcd.alpha_output, "alpha-output");
        set!(c.bcd.beta0, "beta0");
        set!(c.bcd.s, "s");
        set!(c.bcd.t, "t");
        set!(c.sgd.lr, "lr");
        set!(c.sgd.batch_size, "batch-size");
        if let Some(v) = self.flag("momentum")? {
            c.bcd.momentum = v;
        }
        if let Some(v) = self.flag("timing")? {
            c.timing = v;
        }
        if let Some(layers) = self.get("layers") {
            c.layers = Some(parse_layers(layers)?);
        }
        if c.dataset == DatasetKind::Blobs {
            if let Some(k) = c.classes {
                c.blobs.classes = k;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_layers(text: &str) -> Result<Vec<usize>, ConfigError> {
    let bad = |reason: &str| ConfigError::InvalidValue {
        key: "layers".into(),
        value: text.to_string(),
        reason: reason.to_string(),
    };
    let dims: Vec<usize> = text
        .split(',')
        .map(|d| d.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("expected comma-separated widths"))?;
    if dims.len() < 3 {
        return Err(bad("need an input width, at least one hidden width and an output width"));
    }
    Ok(dims)
}

impl RunConfig {
    /// Checks that the options needed by the chosen dataset are present.
    /// Dimension checks against the loaded data happen at run time.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.dataset {
            DatasetKind::Mnist | DatasetKind::Cifar10 if self.data_dir.is_none() => {
                return Err(ConfigError::Missing("data-dir".into()));
            }
            DatasetKind::Csv => {
                if self.train_csv.is_none() {
                    return Err(ConfigError::Missing("train-csv".into()));
                }
                if self.classes.is_none() {
                    return Err(ConfigError::Missing("classes".into()));
                }
            }
            _ => {}
        }
        if self.metrics_out.as_os_str().is_empty() {
            return Err(ConfigError::Missing("metrics-out".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        Settings::parse(text, Path::new("test.conf"))?.into_config()
    }

    #[test]
    fn file_format() {
        let c = parse("# comment\noptimizer = bcd\n\nlayers = 20, 8, 3 # trailing\nalpha_odd=2.5\nno-such = 1\n");
        assert_eq!(c, Err(ConfigError::UnknownKey("no-such".into())));
        let c = parse("# comment\noptimizer = bcd\n\nlayers = 20, 8, 3 # trailing\nalpha_odd=2.5\n").unwrap();
        assert_eq!(c.layers, Some(vec![20, 8, 3]));
        assert_eq!(c.bcd.alpha_odd, 2.5);
        assert_eq!(c.bcd.alpha_even, 15.0);
    }

    #[test]
    fn syntax_error_reports_line() {
        assert_eq!(parse("epochs = 3\nepochs 4\n"), Err(ConfigError::Syntax { path: "test.conf".into(), line: 2 }));
    }

    #[test]
    fn overrides_win() {
        let mut s = Settings::parse("epochs = 3\nseed = 9\n", Path::new("x")).unwrap();
        let mut cli = Settings::new();
        cli.set("--epochs", "7").unwrap();
        s.merge(cli);
        let c = s.into_config().unwrap();
        assert_eq!((c.epochs, c.seed), (7, 9));
    }

    #[test]
    fn sgd_rejects_bcd_options() {
        let err = parse("optimizer = sgd\nalpha-odd = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::NotApplicable { key: "alpha-odd".into(), optimizer: Optimizer::Sgd });
        assert!(err.to_string().contains("--alpha-odd"));
        assert!(parse("optimizer = sgd\nmomentum = false\n").is_err());
        assert!(parse("optimizer = bcd\nlr = 0.1\n").is_err());
        assert!(parse("optimizer = sgd\nlr = 0.1\nbatch_size = 32\nlambda = 0.5\n").is_ok());
    }

    #[test]
    fn invalid_values() {
        assert!(matches!(parse("epochs = many\n"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(parse("activation = softplus\n"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(parse("layers = 4\n"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(parse("timing = maybe\n"), Err(ConfigError::InvalidValue { .. })));
    }

    #[test]
    fn dataset_requirements() {
        assert_eq!(parse("dataset = mnist\n"), Err(ConfigError::Missing("data-dir".into())));
        assert_eq!(parse("dataset = csv\ntrain-csv = a.csv\n"), Err(ConfigError::Missing("classes".into())));
        let c = parse("dataset = blobs\nclasses = 4\n").unwrap();
        assert_eq!(c.blobs.classes, 4);
    }
}
