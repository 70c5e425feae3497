//! Dataset loaders and generators. All loaders return features as columns
//! scaled to `[0, 1]` (except CSV, which is read verbatim) and one-hot labels.

mod blobs;
mod cifar;
mod csv_io;
mod idx;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use blobs::make_blobs;
pub use cifar::{load_cifar10, CIFAR_DIM, CIFAR_RECORD};
pub use csv_io::{load_csv, write_csv};
pub use idx::{load_idx, IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC};

/// Number of classes in MNIST and CIFAR-10.
pub const IMAGE_CLASSES: usize = 10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: bad magic number {found} (expected {expected})")]
    BadMagic { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: truncated file ({reason})")]
    TruncatedFile { path: PathBuf, reason: String },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{path}:{line}: cannot parse `{field}`")]
    ParseError { path: PathBuf, line: usize, field: String },
    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    RaggedRows { path: PathBuf, line: usize, expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

fn check_labels(labels: &[usize], classes: usize) -> Result<(), DataError> {
    match labels.iter().find(|&&l| l >= classes) {
        Some(&label) => Err(DataError::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}
