use std::path::Path;

use ndarray::Array2;

use super::{check_labels, DataError};
use crate::model::Dataset;

/// Headerless numeric CSV, one sample per row. `label_column` holds the
/// integer class in `0..classes`; every other column is a feature.
pub fn load_csv(path: &Path, label_column: usize, classes: usize) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let mut features: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| io_error(path, e))?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::RaggedRows { path: path.to_path_buf(), line, expected, found: record.len() });
        }
        if label_column >= expected {
            return Err(DataError::Invalid(format!("label column {label_column} but rows have {expected} fields")));
        }
        let parse_err = |field: &str| DataError::ParseError { path: path.to_path_buf(), line, field: field.to_string() };
        for (c, field) in record.iter().enumerate() {
            if c == label_column {
                labels.push(field.parse::<usize>().map_err(|_| parse_err(field))?);
            } else {
                features.push(field.parse::<f64>().map_err(|_| parse_err(field))?);
            }
        }
    }
    let Some(width) = width else {
        return Err(DataError::Invalid(format!("{}: no rows", path.display())));
    };
    check_labels(&labels, classes)?;
    let (n, dim) = (labels.len(), width - 1);
    let x = Array2::from_shape_fn((dim, n), |(i, j)| features[j * dim + i]);
    Dataset::new(x, labels, classes).map_err(|e| DataError::Invalid(e.to_string()))
}

/// Writes `data` in the layout [`load_csv`] reads, label last. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for (j, &label) in data.labels.iter().enumerate() {
        let mut row: Vec<String> = data.x.column(j).iter().map(|v| v.to_string()).collect();
        row.push(label.to_string());
        writer.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

fn io_error(path: &Path, e: csv::Error) -> DataError {
    DataError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn file_with(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn label_last() {
        let (_dir, path) = file_with("1,2,0\n3,4,1\n");
        let data = load_csv(&path, 2, 2).unwrap();
        assert_eq!(data.x, array![[1.0, 3.0], [2.0, 4.0]]);
        assert_eq!(data.labels, vec![0, 1]);
        assert_eq!(data.y, array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn ragged() {
        let (_dir, path) = file_with("1,2,0\n3,1\n");
        assert!(matches!(load_csv(&path, 2, 2), Err(DataError::RaggedRows { line: 2, .. })));
    }

    #[test]
    fn label_too_large() {
        let (_dir, path) = file_with("1,2,0\n3,4,2\n");
        assert!(matches!(load_csv(&path, 2, 2), Err(DataError::LabelOutOfRange { label: 2, classes: 2 })));
    }

    #[test]
    fn non_numeric() {
        let (_dir, path) = file_with("1,x,0\n");
        assert!(matches!(load_csv(&path, 2, 2), Err(DataError::ParseError { line: 1, .. })));
    }

    #[test]
    fn write_then_load() {
        let data = Dataset::new(array![[0.1, 1.0 / 3.0], [-2.5, 1e-17]], vec![1, 0], 2).unwrap();
        let (_dir, path) = file_with("");
        write_csv(&path, &data).unwrap();
        assert_eq!(load_csv(&path, 2, 2).unwrap(), data);
    }
}
