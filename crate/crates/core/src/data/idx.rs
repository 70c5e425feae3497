use std::path::Path;

use ndarray::Array2;

use super::{check_labels, read_file, DataError, IMAGE_CLASSES};
use crate::model::Dataset;

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn truncated(path: &Path, reason: impl Into<String>) -> DataError {
    DataError::TruncatedFile { path: path.to_path_buf(), reason: reason.into() }
}

/// Reads the header of an IDX file and returns its dimensions and payload.
fn parse_idx<'a>(path: &Path, bytes: &'a [u8], magic: u32, ndims: usize) -> Result<(Vec<usize>, &'a [u8]), DataError> {
    let header = 4 + 4 * ndims;
    if bytes.len() < 4 {
        return Err(truncated(path, "missing magic number"));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(DataError::BadMagic { path: path.to_path_buf(), found, expected: magic });
    }
    if bytes.len() < header {
        return Err(truncated(path, "incomplete header"));
    }
    let dims: Vec<usize> = (0..ndims).map(|i| be_u32(bytes, 4 + 4 * i) as usize).collect();
    let expected = dims.iter().product::<usize>();
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(truncated(path, format!("{} of {expected} data bytes", payload.len())));
    }
    Ok((dims, &payload[..expected]))
}

/// MNIST-style IDX pair: `u8` images (magic 2051) and `u8` labels (magic 2049).
/// Each image becomes one column, pixels divided by 255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let image_bytes = read_file(images_path)?;
    let label_bytes = read_file(labels_path)?;
    let (dims, pixels) = parse_idx(images_path, &image_bytes, IDX_IMAGE_MAGIC, 3)?;
    let (ldims, raw_labels) = parse_idx(labels_path, &label_bytes, IDX_LABEL_MAGIC, 1)?;
    let (n, dim) = (dims[0], dims[1] * dims[2]);
    if ldims[0] != n {
        return Err(DataError::Invalid(format!("{n} images but {} labels", ldims[0])));
    }
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    check_labels(&labels, IMAGE_CLASSES)?;
    // Stored row-major as (n, dim); transposed so samples are columns.
    let x = Array2::from_shape_fn((dim, n), |(i, j)| pixels[j * dim + i] as f64 / 255.0);
    Dataset::new(x, labels, IMAGE_CLASSES).map_err(|e| DataError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn idx_bytes(magic: u32, dims: &[u32], data: &[u8]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(data);
        out
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::File::create(&path).unwrap().write_all(bytes).unwrap();
        path
    }

    #[test]
    fn two_image_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let images = write(dir.path(), "img", &idx_bytes(2051, &[2, 2, 2], &[0, 255, 51, 102, 255, 0, 0, 255]));
        let labels = write(dir.path(), "lbl", &idx_bytes(2049, &[2], &[3, 0]));
        let data = load_idx(&images, &labels).unwrap();
        assert_eq!(data.x.dim(), (4, 2));
        assert_eq!(data.x.column(0).to_vec(), vec![0.0, 1.0, 0.2, 0.4]);
        assert_eq!(data.x.column(1).to_vec(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(data.labels, vec![3, 0]);
        let mut expected = vec![0.0; 10];
        expected[3] = 1.0;
        assert_eq!(data.y.column(0).to_vec(), expected);
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let images = write(dir.path(), "img", &idx_bytes(2052, &[1, 1, 1], &[0]));
        let labels = write(dir.path(), "lbl", &idx_bytes(2049, &[1], &[0]));
        assert!(matches!(load_idx(&images, &labels), Err(DataError::BadMagic { found: 2052, .. })));
    }

    #[test]
    fn truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let images = write(dir.path(), "img", &idx_bytes(2051, &[2, 2, 2], &[0; 7]));
        let labels = write(dir.path(), "lbl", &idx_bytes(2049, &[2], &[0, 0]));
        assert!(matches!(load_idx(&images, &labels), Err(DataError::TruncatedFile { .. })));
    }

    #[test]
    fn label_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let images = write(dir.path(), "img", &idx_bytes(2051, &[1, 1, 1], &[0]));
        let labels = write(dir.path(), "lbl", &idx_bytes(2049, &[1], &[10]));
        assert!(matches!(load_idx(&images, &labels), Err(DataError::LabelOutOfRange { label: 10, .. })));
    }
}
