use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

use super::eigen::symmetric_eigen;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca<T> {
    /// `N x components` projections of the centered data.
    pub scores: Vec<Vec<T>>,
    /// Unit loading vectors, one per retained component.
    pub loadings: Vec<Vec<T>>,
    /// Every covariance eigenvalue, descending.
    pub eigenvalues: Vec<T>,
    /// Variance fraction per retained component.
    pub explained: Vec<T>,
    pub means: Vec<T>,
    /// Fewer components than requested were returned.
    pub rank_deficient: bool,
}

/// Principal components of the column-centered data via the sample covariance.
pub fn pca<T: Scalar>(x: &[Vec<T>], n_components: usize) -> Result<Pca<T>> {
    let n = x.len();
    if n < 2 {
        return Err(CoreError::TooFewPoints { n, min: 2 });
    }
    if n_components == 0 {
        return Err(CoreError::InvalidParameter("n_components must be positive".into()));
    }
    let f = x[0].len();
    if f == 0 || x.iter().any(|r| r.len() != f) {
        return Err(CoreError::InvalidParameter("ragged or empty matrix".into()));
    }

    let nt = T::from_len(n);
    let means: Vec<T> = (0..f).map(|j| x.iter().map(|r| r[j]).sum::<T>() / nt).collect();
    let centered: Vec<Vec<T>> = x.iter().map(|r| r.iter().zip(&means).map(|(v, m)| *v - *m).collect()).collect();

    let denom = T::from_len(n - 1);
    let mut cov = vec![T::zero(); f * f];
    for a in 0..f {
        for b in a..f {
            let s: T = centered.iter().map(|r| r[a] * r[b]).sum::<T>() / denom;
            cov[a * f + b] = s;
            cov[b * f + a] = s;
        }
    }
    let total: T = (0..f).map(|j| cov[j * f + j]).sum();

    let eig = symmetric_eigen(&cov, f);
    let largest = eig.values.first().copied().unwrap_or(T::zero());
    let tol = largest * T::epsilon() * T::from_len(f.max(n)) * T::lit(16.0);
    let rank = eig.values.iter().filter(|&&l| l > tol).count();
    let limit = n_components.min(n - 1).min(f).min(rank);
    let rank_deficient = limit < n_components;

    let loadings: Vec<Vec<T>> = eig.vectors[..limit].to_vec();
    let scores = centered
        .iter()
        .map(|r| loadings.iter().map(|l| r.iter().zip(l).map(|(a, b)| *a * *b).sum()).collect())
        .collect();
    let explained = if total > T::zero() {
        eig.values[..limit].iter().map(|&l| (l / total).max(T::zero())).collect()
    } else {
        vec![T::zero(); limit]
    };
    Ok(Pca { scores, loadings, eigenvalues: eig.values, explained, means, rank_deficient })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_on_a_line_have_one_component() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 2.0 * i as f64 - 1.0]).collect();
        let p = pca(&x, 2).unwrap();
        assert!(p.explained[0] >= 1.0 - 1e-9);
        assert!(p.rank_deficient);
        assert_eq!(p.scores[0].len(), 1);
    }

    #[test]
    fn full_reconstruction() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (1.3 * t).cos(), t * 0.1, (t * t) % 5.0]
            })
            .collect();
        let p = pca(&x, 4).unwrap();
        assert!(!p.rank_deficient);
        for (row, s) in x.iter().zip(&p.scores) {
            for j in 0..4 {
                let rec: f64 = (0..4).map(|k| s[k] * p.loadings[k][j]).sum::<f64>() + p.means[j];
                assert!((rec - row[j]).abs() < 1e-8);
            }
        }
        assert!(p.explained.windows(2).all(|w| w[0] >= w[1]));
        assert!(p.explained.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn component_request_capped_by_sample_count() {
        let x = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.5], vec![3.0, 1.0, 0.0]];
        let p = pca(&x, 3).unwrap();
        assert_eq!(p.loadings.len(), 2);
        assert!(p.rank_deficient);
    }

    #[test]
    fn errors() {
        assert!(matches!(pca(&[vec![1.0f64]], 1), Err(CoreError::TooFewPoints { .. })));
        assert!(matches!(pca(&[vec![1.0f64], vec![2.0]], 0), Err(CoreError::InvalidParameter(_))));
    }
}
