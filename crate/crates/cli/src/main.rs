use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use proxbcd::config::{ConfigError, Settings};
use proxbcd::run::run;

/// Train a multilayer perceptron with proximal block coordinate descent or
/// with minibatch SGD, writing per-epoch metrics as CSV.
#[derive(Debug, Parser)]
#[command(name = "proxbcd", version)]
struct Cli {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bcd or sgd
    #[arg(long)]
    optimizer: Option<String>,
    /// mnist, cifar10, csv or blobs
    #[arg(long)]
    dataset: Option<String>,
    /// Directory with the MNIST IDX or CIFAR-10 binary files
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    train_csv: Option<String>,
    #[arg(long)]
    test_csv: Option<String>,
    /// Label column of the CSV files (default: last)
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    blobs_per_class: Option<String>,
    #[arg(long)]
    blobs_dim: Option<String>,
    #[arg(long)]
    blobs_spread: Option<String>,
    /// Keep only the first N training samples
    #[arg(long)]
    train_limit: Option<String>,
    /// Keep only the first N test samples
    #[arg(long)]
    test_limit: Option<String>,
    /// Comma-separated widths, input first, e.g. 784,256,256,256,10
    #[arg(long)]
    layers: Option<String>,
    /// relu, hardtanh or hardsigmoid
    #[arg(long)]
    activation: Option<String>,
    /// Hidden layer that receives the input as a skip connection
    #[arg(long)]
    residual_into: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    metrics_out: Option<String>,
    /// Write 0 in the seconds column so repeated runs give identical files
    #[arg(long)]
    no_timing: bool,
    /// Use β = 1 for every extrapolation (bcd)
    #[arg(long)]
    no_momentum: bool,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    alpha_odd: Option<String>,
    #[arg(long)]
    alpha_even: Option<String>,
    /// Proximal weight of the output layer (default: --alpha-odd)
    #[arg(long)]
    alpha_output: Option<String>,
    #[arg(long)]
    beta0: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    t: Option<String>,
    /// Weight decay (λ/2)‖W‖² on every layer
    #[arg(long)]
    lambda: Option<String>,
    /// Learning rate (sgd)
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
}

impl Cli {
    fn settings(&self) -> Result<Settings, ConfigError> {
        let mut settings = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::new(),
        };
        let mut flags = Settings::new();
        let values = [
            ("optimizer", &self.optimizer),
            ("dataset", &self.dataset),
            ("data-dir", &self.data_dir),
            ("train-csv", &self.train_csv),
            ("test-csv", &self.test_csv),
            ("label-column", &self.label_column),
            ("classes", &self.classes),
            ("blobs-per-class", &self.blobs_per_class),
            ("blobs-dim", &self.blobs_dim),
            ("blobs-spread", &self.blobs_spread),
            ("train-limit", &self.train_limit),
            ("test-limit", &self.test_limit),
            ("layers", &self.layers),
            ("activation", &self.activation),
            ("residual-into", &self.residual_into),
            ("epochs", &self.epochs),
            ("seed", &self.seed),
            ("metrics-out", &self.metrics_out),
            ("gamma", &self.gamma),
            ("alpha-odd", &self.alpha_odd),
            ("alpha-even", &self.alpha_even),
            ("alpha-output", &self.alpha_output),
            ("beta0", &self.beta0),
            ("s", &self.s),
            ("t", &self.t),
            ("lambda", &self.lambda),
            ("lr", &self.lr),
            ("batch-size", &self.batch_size),
        ];
        for (key, value) in values {
            if let Some(v) = value {
                flags.set(key, v.as_str())?;
            }
        }
        if self.no_momentum {
            flags.set("momentum", "false")?;
        }
        if self.no_timing {
            flags.set("timing", "false")?;
        }
        settings.merge(flags);
        Ok(settings)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.settings().and_then(Settings::into_config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("proxbcd: configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary(&cfg));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("proxbcd: {e}");
            ExitCode::FAILURE
        }
    }
}
