//! Exact t-SNE.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 4.4,
            iterations: 300,
            seed: 0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 100,
        }
    }
}

/// Embeds the rows of `samples` (`M×D`) into the plane.
pub fn embed_2d<A: Scalar>(samples: ArrayView2<A>, config: &TsneConfig) -> Result<Array2<f64>> {
    let m = samples.nrows();
    if m < 5 {
        return Err(Error::Degenerate(format!("need at least 5 points, got {m}")));
    }
    if !(config.perplexity > 0.0 && config.perplexity < (m - 1) as f64) {
        return Err(config_err(
            "perplexity",
            format!("{} must lie in (0, {})", config.perplexity, m - 1),
        ));
    }
    let x = samples.mapv(|v| v.as_f64());
    let first = x.row(0);
    if x.rows().into_iter().all(|r| r == first) {
        return Err(Error::Degenerate("all points are identical".into()));
    }
    let d2 = squared_distances(&x);
    let p = joint_probabilities(&d2, config.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid");
    let mut y = Array2::from_shape_fn((m, 2), |_| normal.sample(&mut rng));
    let mut update = Array2::<f64>::zeros((m, 2));
    let mut gains = Array2::<f64>::ones((m, 2));
    let lr = (m as f64 / config.early_exaggeration / 4.0).max(50.0);
    let mut q = Array2::<f64>::zeros((m, m));
    let mut grad = Array2::<f64>::zeros((m, 2));

    for it in 0..config.iterations {
        let exaggerate = if it < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < config.exaggeration_iterations { 0.5 } else { 0.8 };
        let mut z = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let dx = y[[i, 0]] - y[[j, 0]];
                let dy = y[[i, 1]] - y[[j, 1]];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[[i, j]] = w;
                q[[j, i]] = w;
                z += 2.0 * w;
            }
        }
        grad.fill(0.0);
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let w = q[[i, j]];
                let coef = 4.0 * (exaggerate * p[[i, j]] - w / z) * w;
                grad[[i, 0]] += coef * (y[[i, 0]] - y[[j, 0]]);
                grad[[i, 1]] += coef * (y[[i, 1]] - y[[j, 1]]);
            }
        }
        for i in 0..m {
            for k in 0..2 {
                let g = grad[[i, k]];
                gains[[i, k]] = if (g > 0.0) != (update[[i, k]] > 0.0) {
                    gains[[i, k]] + 0.2
                } else {
                    (gains[[i, k]] * 0.8).max(0.01)
                };
                update[[i, k]] = momentum * update[[i, k]] - lr * gains[[i, k]] * g;
                y[[i, k]] += update[[i, k]];
            }
        }
        let mean = y.mean_axis(ndarray::Axis(0)).expect("non-empty");
        y -= &mean;
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("embedding diverged".into()));
    }
    Ok(y)
}

fn squared_distances(x: &Array2<f64>) -> Array2<f64> {
    let m = x.nrows();
    let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
    let gram = x.dot(&x.t());
    Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            0.0
        } else {
            (norms[i] + norms[j] - 2.0 * gram[[i, j]]).max(0.0)
        }
    })
}

/// Gaussian neighbour distribution over `row` whose bandwidth is bisected to match `perplexity`.
fn conditional_row(row: &[f64], perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    // distances are shifted by their minimum to keep the exponentials in range
    let d_min = row.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi, mut beta) = (0.0, f64::INFINITY, 1.0);
    let mut probs = vec![0.0; row.len()];
    for _ in 0..200 {
        let mut sum = 0.0;
        for (pk, &d) in probs.iter_mut().zip(row) {
            *pk = (-(d - d_min) * beta).exp();
            sum += *pk;
        }
        let mut weighted = 0.0;
        for (pk, &d) in probs.iter_mut().zip(row) {
            *pk /= sum;
            weighted += (d - d_min) * *pk;
        }
        let diff = sum.ln() + beta * weighted - target;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    probs
}

/// Symmetrised joint affinities `(P + Pᵀ) / 2M`.
fn joint_probabilities(d2: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let m = d2.nrows();
    let mut p = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        let row: Vec<f64> = others.iter().map(|&j| d2[[i, j]]).collect();
        for (&j, v) in others.iter().zip(conditional_row(&row, perplexity)) {
            p[[i, j]] = v;
        }
    }
    let sym = (&p + &p.t()) / (2.0 * m as f64);
    sym.mapv(|v| v.max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_means_purity(y: &Array2<f64>, labels: &[usize]) -> f64 {
        let m = y.nrows();
        let mut c = [y.row(0).to_owned(), y.row(m - 1).to_owned()];
        let mut assign = vec![0; m];
        for _ in 0..50 {
            for i in 0..m {
                let d: Vec<f64> = c
                    .iter()
                    .map(|ci| (&y.row(i) - ci).mapv(|v| v * v).sum())
                    .collect();
                assign[i] = usize::from(d[1] < d[0]);
            }
            for (k, ck) in c.iter_mut().enumerate() {
                let members: Vec<usize> = (0..m).filter(|&i| assign[i] == k).collect();
                if !members.is_empty() {
                    *ck = y.select(ndarray::Axis(0), &members).mean_axis(ndarray::Axis(0)).unwrap();
                }
            }
        }
        let agree = (0..m).filter(|&i| assign[i] == labels[i]).count();
        agree.max(m - agree) as f64 / m as f64
    }

    #[test]
    fn separated_clusters_stay_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m = 60;
        let labels: Vec<usize> = (0..m).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((m, 20), |(i, _)| normal.sample(&mut rng) + 8.0 * labels[i] as f64);
        let y = embed_2d(x.view(), &TsneConfig::default()).unwrap();
        assert_eq!(y.dim(), (m, 2));
        assert!(y.iter().all(|v| v.is_finite()));
        assert!(two_means_purity(&y, &labels) >= 0.9);
    }

    #[test]
    fn embedding_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((12, 5), |_| rng.random_range(-1.0f32..1.0));
        let cfg = TsneConfig { iterations: 50, ..Default::default() };
        assert_eq!(embed_2d(x.view(), &cfg).unwrap(), embed_2d(x.view(), &cfg).unwrap());
    }

    #[test]
    fn identical_or_too_few_points_are_rejected() {
        let same = Array2::<f64>::ones((8, 3));
        assert!(matches!(embed_2d(same.view(), &TsneConfig::default()), Err(Error::Degenerate(_))));
        let few = Array2::from_shape_fn((4, 3), |(i, j)| (i * j) as f64);
        assert!(embed_2d(few.view(), &TsneConfig::default()).is_err());
    }

    #[test]
    fn affinity_rows_reach_the_requested_perplexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((30, 4), |_| rng.random_range(-1.0f64..1.0));
        let d2 = squared_distances(&x);
        let row: Vec<f64> = (1..30).map(|j| d2[[0, j]]).collect();
        let probs = conditional_row(&row, 4.4);
        let entropy: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
        assert!((entropy.exp() - 4.4).abs() < 1e-3);
        assert!((joint_probabilities(&d2, 4.4).sum() - 1.0).abs() < 1e-6);
    }
}
