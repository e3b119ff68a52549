//! Low-dimensional embeddings of the normalized library: bad-column
//! filtering, PCA and exact t-SNE.

mod eigen;
mod pca;
mod tsne;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use pca::{pca, Pca};
pub use tsne::{
    conditional_probabilities, joint_probabilities, kl_divergence, student_t_affinities, tsne, Tsne, TsneParams,
};

/// Matrix with every column that has any undefined entry removed.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredMatrix<T> {
    pub rows: Vec<Vec<T>>,
    pub kept: Vec<usize>,
}

pub fn filter_columns<T: Scalar, V: AsRef<[Option<T>]>>(matrix: &[V]) -> Result<FilteredMatrix<T>> {
    let width = matrix.first().map_or(0, |r| r.as_ref().len());
    if matrix.iter().any(|r| r.as_ref().len() != width) {
        return Err(CoreError::InvalidParameter("ragged matrix".into()));
    }
    let kept: Vec<usize> =
        (0..width).filter(|&j| matrix.iter().all(|r| r.as_ref()[j].is_some_and(|v| v.is_finite()))).collect();
    if kept.is_empty() {
        return Err(CoreError::AllColumnsBad);
    }
    let rows =
        matrix.iter().map(|r| kept.iter().map(|&j| r.as_ref()[j].expect("kept column is defined")).collect()).collect();
    Ok(FilteredMatrix { rows, kept })
}

pub(crate) fn squared_distances<T: Scalar>(x: &[Vec<T>]) -> Vec<T> {
    let n = x.len();
    let mut d = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: T = x[i].iter().zip(&x[j]).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_masks_is_identity() {
        let m = vec![vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]];
        let f = filter_columns(&m).unwrap();
        assert_eq!(f.kept, vec![0, 1]);
        assert_eq!(f.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn masked_cell_drops_its_column() {
        let mut m = vec![vec![Some(0.5); 5]; 4];
        m[2][3] = None;
        let f = filter_columns(&m).unwrap();
        assert_eq!(f.kept, vec![0, 1, 2, 4]);
        assert!(f.rows.iter().all(|r| r.len() == 4));
    }

    #[test]
    fn all_bad() {
        let m = vec![vec![None, Some(1.0)], vec![Some(1.0), None]];
        assert_eq!(filter_columns::<f64, _>(&m), Err(CoreError::AllColumnsBad));
    }
}
