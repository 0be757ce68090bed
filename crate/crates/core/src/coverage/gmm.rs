//! Diagonal-covariance Gaussian mixture fitted by EM, used to turn item
//! embeddings into topic-coverage vectors (posterior responsibilities).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::CoverageModel;
use crate::math;
use crate::rng::{self, purpose};
use crate::{Error, Result};

const LOG_2PI: f64 = 1.837_877_066_409_345_5;
const VARIANCE_FLOOR: f64 = 1e-6;
const WEIGHT_FLOOR: f64 = 1e-8;
const RESPONSIBILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub max_iterations: usize,
    /// Stop once the mean log-likelihood improves by less than this.
    pub tolerance: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    pub iterations: usize,
    pub mean_log_likelihood: f64,
}

impl GaussianMixture {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    fn log_density(&self, k: usize, x: &[f64]) -> f64 {
        let mean = self.mean(k);
        let var = &self.variances[k * self.dim..(k + 1) * self.dim];
        let mut acc = 0.0;
        for j in 0..self.dim {
            let d = x[j] - mean[j];
            acc += LOG_2PI + math::ln(var[j]) + d * d / var[j];
        }
        -0.5 * acc
    }

    /// Posterior responsibilities of `x` into `out`; returns `log p(x)`.
    fn posterior(&self, x: &[f64], out: &mut [f64]) -> f64 {
        for (k, o) in out.iter_mut().enumerate() {
            *o = math::ln(self.weights[k]) + self.log_density(k, x);
        }
        let peak = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = math::exp(*o - peak);
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
        peak + math::ln(total)
    }

    /// Posterior topic probabilities of one point.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.components()];
        self.posterior(x, &mut out);
        out
    }

    /// Fits a `components`-way mixture to the rows of `data` (row-major,
    /// `dim` columns), initialized by k-means++ under `seed`.
    pub fn fit(data: &[f64], dim: usize, components: usize, seed: u64, opts: GmmOptions) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len(),
            });
        }
        let n = data.len() / dim;
        if components < 2 {
            return Err(Error::InvalidParameter("at least two topics are required"));
        }
        if n < components {
            return Err(Error::InvalidParameter("need at least as many points as topics"));
        }
        if !math::all_finite(data) {
            return Err(Error::NonFinite);
        }
        let row = |i: usize| &data[i * dim..(i + 1) * dim];
        let mut rng = rng::stream(seed, purpose::COVERAGE);

        // global per-coordinate variance seeds every component
        let mut global_mean = vec![0.0; dim];
        for i in 0..n {
            for (g, v) in global_mean.iter_mut().zip(row(i)) {
                *g += v / n as f64;
            }
        }
        let mut global_var = vec![0.0; dim];
        for i in 0..n {
            for j in 0..dim {
                let d = row(i)[j] - global_mean[j];
                global_var[j] += d * d / n as f64;
            }
        }
        for v in &mut global_var {
            *v = v.max(VARIANCE_FLOOR);
        }

        let centers = kmeans_plus_plus(data, dim, components, &mut rng);
        let mut model = GaussianMixture {
            dim,
            weights: vec![1.0 / components as f64; components],
            means: centers,
            variances: global_var.iter().copied().cycle().take(components * dim).collect(),
            iterations: 0,
            mean_log_likelihood: f64::NEG_INFINITY,
        };

        let mut resp = vec![0.0; n * components];
        let mut point_ll = vec![0.0; n];
        let mut reseeded = vec![false; components];
        let mut previous = f64::NEG_INFINITY;
        for iteration in 1..=opts.max_iterations {
            // E-step
            let mut ll = 0.0;
            for i in 0..n {
                point_ll[i] = model.posterior(row(i), &mut resp[i * components..(i + 1) * components]);
                ll += point_ll[i];
            }
            ll /= n as f64;

            // M-step
            for k in 0..components {
                let nk: f64 = (0..n).map(|i| resp[i * components + k]).sum();
                if nk / (n as f64) < WEIGHT_FLOOR {
                    if reseeded[k] {
                        return Err(Error::Fit("component collapsed after re-seeding"));
                    }
                    reseeded[k] = true;
                    // restart on the worst-explained point
                    let worst = (0..n)
                        .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]))
                        .expect("n >= components >= 2");
                    model.means[k * dim..(k + 1) * dim].copy_from_slice(row(worst));
                    model.variances[k * dim..(k + 1) * dim].copy_from_slice(&global_var);
                    model.weights[k] = 1.0 / components as f64;
                    continue;
                }
                model.weights[k] = nk / n as f64;
                for j in 0..dim {
                    let mean = (0..n).map(|i| resp[i * components + k] * row(i)[j]).sum::<f64>() / nk;
                    let var = (0..n)
                        .map(|i| {
                            let d = row(i)[j] - mean;
                            resp[i * components + k] * d * d
                        })
                        .sum::<f64>()
                        / nk;
                    model.means[k * dim + j] = mean;
                    model.variances[k * dim + j] = var.max(VARIANCE_FLOOR);
                }
            }
            let total: f64 = model.weights.iter().sum();
            for w in &mut model.weights {
                *w /= total;
            }
            model.iterations = iteration;
            model.mean_log_likelihood = ll;
            if (ll - previous).abs() < opts.tolerance {
                break;
            }
            previous = ll;
        }
        Ok(model)
    }
}

fn kmeans_plus_plus<R: Rng>(data: &[f64], dim: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let sq_dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centers.len();
        centers.extend_from_slice(row(pick));
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(sq_dist(row(i), &centers[start..start + dim]));
        }
    }
    centers
}

/// Coverage vectors from embeddings: the posterior responsibilities of a
/// `d_prime`-component diagonal Gaussian mixture, floored at `1e-12`.
///
/// `embeddings` is row-major with `dim` columns; item ids are `0..n`.
pub fn build_coverage_from_embeddings(
    embeddings: &[f64],
    dim: usize,
    d_prime: usize,
    seed: u64,
) -> Result<CoverageModel> {
    let n = embeddings.len().checked_div(dim).unwrap_or(0);
    build_coverage_with_ids(embeddings, dim, (0..n as u64).collect(), d_prime, seed)
}

/// [`build_coverage_from_embeddings`] with explicit item ids.
pub fn build_coverage_with_ids(
    embeddings: &[f64],
    dim: usize,
    ids: Vec<u64>,
    d_prime: usize,
    seed: u64,
) -> Result<CoverageModel> {
    let gmm = GaussianMixture::fit(embeddings, dim, d_prime, seed, GmmOptions::default())?;
    let mut c = Vec::with_capacity(ids.len() * d_prime);
    for x in embeddings.chunks_exact(dim) {
        c.extend(gmm.responsibilities(x).into_iter().map(|r| r.max(RESPONSIBILITY_FLOOR)));
    }
    CoverageModel::from_flat(d_prime, c, ids)
}
