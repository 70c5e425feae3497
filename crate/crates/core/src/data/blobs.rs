use ndarray::Array2;

use super::DataError;
use crate::model::Dataset;
use crate::numerics::RngStream;

/// `classes` isotropic Gaussian clusters in `R^dim` with standard deviation
/// `spread`. Class `k` has mean `(1 + ⌊k/dim⌋) e_{k mod dim}`, i.e. `e_k`
/// whenever `classes ≤ dim`; any two means are at least 1 apart. Samples are
/// grouped by class.
pub fn make_blobs(
    n_per_class: usize,
    classes: usize,
    dim: usize,
    spread: f64,
    rng: &mut RngStream,
) -> Result<Dataset, DataError> {
    if n_per_class == 0 || classes == 0 || dim == 0 {
        return Err(DataError::Invalid("blob counts must be at least 1".into()));
    }
    let n = n_per_class * classes;
    let labels: Vec<usize> = (0..n).map(|j| j / n_per_class).collect();
    let mut x = Array2::zeros((dim, n));
    for (j, mut col) in x.columns_mut().into_iter().enumerate() {
        for v in col.iter_mut() {
            *v = spread * rng.standard_normal();
        }
        let k = labels[j];
        col[k % dim] += (1 + k / dim) as f64;
    }
    Dataset::new(x, labels, classes).map_err(|e| DataError::Invalid(e.to_string()))
}
