use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

use super::squared_distances;

const MIN_POINTS: usize = 5;
const ENTROPY_TOLERANCE: f64 = 1e-5;
const MAX_BISECTION_STEPS: usize = 500;
const INIT_SIGMA: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and the initial momentum.
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            seed: 0,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tsne<T> {
    pub coords: Vec<[T; 2]>,
    /// KL(P || Q) after every iteration, measured against the unexaggerated P.
    pub kl_trace: Vec<T>,
    /// Perplexity actually used after the small-N reduction.
    pub perplexity: f64,
    /// `|H(P_i) - log2(perplexity)|` per point, in bits.
    pub entropy_errors: Vec<T>,
}

/// Row-stochastic conditional affinities `p_{j|i}` (row-major `n x n`) with
/// Gaussian bandwidths bisected so each row's entropy is `log2(perplexity)` bits.
/// Returns the matrix and the per-row entropy error.
pub fn conditional_probabilities<T: Scalar>(sq_dist: &[T], n: usize, perplexity: f64) -> (Vec<T>, Vec<T>) {
    let target = perplexity.log2();
    let ln2 = std::f64::consts::LN_2;
    let mut p = vec![T::zero(); n * n];
    let errors: Vec<T> = p
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let d: Vec<f64> = (0..n).map(|j| sq_dist[i * n + j].to_f64_lossy()).collect();
            let d_min = (0..n).filter(|&j| j != i).map(|j| d[j]).fold(f64::INFINITY, f64::min);
            let mut beta = 1.0;
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            let mut probs = vec![0.0f64; n];
            let mut err = f64::INFINITY;
            for _ in 0..MAX_BISECTION_STEPS {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for j in 0..n {
                    if j == i {
                        probs[j] = 0.0;
                        continue;
                    }
                    let shifted = d[j] - d_min;
                    let w = (-beta * shifted).exp();
                    probs[j] = w;
                    sum += w;
                    weighted += shifted * w;
                }
                let h_bits = (sum.ln() + beta * weighted / sum) / ln2;
                for v in probs.iter_mut() {
                    *v /= sum;
                }
                err = (h_bits - target).abs();
                if err < ENTROPY_TOLERANCE {
                    break;
                }
                if h_bits > target {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
                }
            }
            for (slot, &v) in row.iter_mut().zip(&probs) {
                *slot = T::lit(v);
            }
            T::lit(err)
        })
        .collect();
    (p, errors)
}

/// Symmetrized joint affinities `(p_{j|i} + p_{i|j}) / 2n`.
pub fn joint_probabilities<T: Scalar>(conditional: &[T], n: usize) -> Vec<T> {
    let denom = T::from_len(2 * n);
    let mut p = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) / denom;
        }
    }
    p
}

/// Student-t (one degree of freedom) affinities of an embedding.
pub fn student_t_affinities<T: Scalar>(coords: &[[T; 2]]) -> Vec<T> {
    let n = coords.len();
    let mut q = vec![T::zero(); n * n];
    let mut z = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = kernel(&coords[i], &coords[j]);
                q[i * n + j] = v;
                z = z + v;
            }
        }
    }
    q.iter_mut().for_each(|v| *v = *v / z);
    q
}

pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).filter(|(&pi, _)| pi > T::zero()).map(|(&pi, &qi)| pi * (pi / qi).ln()).sum()
}

#[inline]
fn kernel<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    T::one() / (T::one() + dx * dx + dy * dy)
}

/// Exact t-SNE into two dimensions.
///
/// Deterministic for a given seed: parallel loops only split independent
/// rows, and every reduction runs sequentially.
pub fn tsne<T: Scalar>(x: &[Vec<T>], params: &TsneParams) -> Result<Tsne<T>> {
    let n = x.len();
    if n < MIN_POINTS {
        return Err(CoreError::TooFewPoints { n, min: MIN_POINTS });
    }
    if !(params.perplexity > 0.0) || params.iterations == 0 || !(params.learning_rate > 0.0) {
        return Err(CoreError::InvalidParameter("perplexity, iterations and learning rate must be positive".into()));
    }
    let perplexity =
        if (n as f64) < 3.0 * params.perplexity { f64::max(2.0, (n - 1) as f64 / 3.0) } else { params.perplexity };

    let sq = squared_distances(x);
    let (cond, entropy_errors) = conditional_probabilities(&sq, n, perplexity);
    let p = joint_probabilities(&cond, n);
    let p_log_p: T = p.iter().filter(|&&v| v > T::zero()).map(|&v| v * v.ln()).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, INIT_SIGMA).expect("valid sigma");
    let mut y: Vec<[T; 2]> =
        (0..n).map(|_| [T::lit(normal.sample(&mut rng)), T::lit(normal.sample(&mut rng))]).collect();
    let mut update = vec![[T::zero(); 2]; n];
    let mut gains = vec![[T::one(); 2]; n];
    let lr = T::lit(params.learning_rate);
    let min_gain = T::lit(MIN_GAIN);
    let mut kl_trace = Vec::with_capacity(params.iterations);

    for iter in 0..params.iterations {
        let exaggerating = iter < params.exaggeration_iterations;
        let exaggeration = T::lit(if exaggerating { params.early_exaggeration } else { 1.0 });
        let momentum = T::lit(if exaggerating { params.initial_momentum } else { params.final_momentum });

        // per row: sum of kernel values and sum_j P_ij ln(1 + d_ij^2)
        let row_terms: Vec<(T, T)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = T::zero();
                let mut pl = T::zero();
                for j in 0..n {
                    if j != i {
                        let k = kernel(&y[i], &y[j]);
                        s = s + k;
                        pl = pl - p[i * n + j] * k.ln();
                    }
                }
                (s, pl)
            })
            .collect();
        let z: T = row_terms.iter().map(|t| t.0).sum();
        let p_log_kernel: T = row_terms.iter().map(|t| t.1).sum();
        // KL = sum P ln P - sum P ln(k / Z) = sum P ln P + sum P ln(1 + d^2) + ln Z
        kl_trace.push(p_log_p + p_log_kernel + z.ln());

        let grads: Vec<[T; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [T::zero(); 2];
                for j in 0..n {
                    if j != i {
                        let k = kernel(&y[i], &y[j]);
                        let m = (exaggeration * p[i * n + j] - k / z) * k;
                        g[0] = g[0] + m * (y[i][0] - y[j][0]);
                        g[1] = g[1] + m * (y[i][1] - y[j][1]);
                    }
                }
                [T::lit(4.0) * g[0], T::lit(4.0) * g[1]]
            })
            .collect();

        for i in 0..n {
            for d in 0..2 {
                let same_sign = (grads[i][d] > T::zero()) == (update[i][d] > T::zero());
                gains[i][d] = if same_sign { gains[i][d] * T::lit(0.8) } else { gains[i][d] + T::lit(0.2) };
                gains[i][d] = gains[i][d].max(min_gain);
                update[i][d] = momentum * update[i][d] - lr * gains[i][d] * grads[i][d];
                y[i][d] = y[i][d] + update[i][d];
            }
        }
        let nt = T::from_len(n);
        let cx = y.iter().map(|c| c[0]).sum::<T>() / nt;
        let cy = y.iter().map(|c| c[1]).sum::<T>() / nt;
        for c in y.iter_mut() {
            c[0] = c[0] - cx;
            c[1] = c[1] - cy;
        }
    }
    if y.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(CoreError::InvalidParameter("t-SNE diverged".into()));
    }
    Ok(Tsne { coords: y, kl_trace, perplexity, entropy_errors })
}
