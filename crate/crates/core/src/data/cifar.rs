use std::path::Path;

use ndarray::Array2;

use super::{check_labels, read_file, DataError, IMAGE_CLASSES};
use crate::model::Dataset;

/// Pixels per image: 32×32 in R, G, B planes.
pub const CIFAR_DIM: usize = 3072;
/// One label byte followed by the pixels.
pub const CIFAR_RECORD: usize = CIFAR_DIM + 1;

/// CIFAR-10 binary batches, concatenated in the order given.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<Dataset, DataError> {
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for path in batch_paths {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        if bytes.len() % CIFAR_RECORD != 0 {
            return Err(DataError::TruncatedFile {
                path: path.to_path_buf(),
                reason: format!("{} bytes is not a multiple of {CIFAR_RECORD}", bytes.len()),
            });
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(record[0] as usize);
            pixels.extend_from_slice(&record[1..]);
        }
    }
    check_labels(&labels, IMAGE_CLASSES)?;
    let n = labels.len();
    let x = Array2::from_shape_fn((CIFAR_DIM, n), |(i, j)| pixels[j * CIFAR_DIM + i] as f64 / 255.0);
    Dataset::new(x, labels, IMAGE_CLASSES).map_err(|e| DataError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut record = vec![7u8];
        record.extend((0..CIFAR_DIM).map(|i| if i == 0 { 255 } else { 0 }));
        let path = dir.path().join("batch.bin");
        std::fs::write(&path, &record).unwrap();
        let data = load_cifar10(&[&path]).unwrap();
        assert_eq!(data.x.dim(), (CIFAR_DIM, 1));
        assert_eq!(data.labels, vec![7]);
        assert_eq!(data.y[[7, 0]], 1.0);
        assert_eq!(data.y.sum(), 1.0);
        assert_eq!(data.x[[0, 0]], 1.0);
        assert_eq!(data.x[[1, 0]], 0.0);
    }

    #[test]
    fn bad_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        std::fs::write(&path, vec![0u8; CIFAR_RECORD + 1]).unwrap();
        assert!(matches!(load_cifar10(&[&path]), Err(DataError::TruncatedFile { .. })));
    }

    #[test]
    fn label_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        let mut record = vec![0u8; CIFAR_RECORD];
        record[0] = 12;
        std::fs::write(&path, &record).unwrap();
        assert!(matches!(load_cifar10(&[&path]), Err(DataError::LabelOutOfRange { label: 12, .. })));
    }
}
