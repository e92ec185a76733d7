//! Exact t-SNE.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 4 {
            return Err(Error::TooFewPoints(n));
        }
        if !(self.perplexity >= 1.0) || self.perplexity > (n - 1) as f64 / 3.0 {
            return Err(Error::PerplexityTooLarge {
                perplexity: self.perplexity,
                points: n,
            });
        }
        if self.iterations == 0 || !(self.learning_rate > 0.0) || !(self.exaggeration >= 1.0) {
            return Err(Error::InvalidConfig(format!("bad t-SNE settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOutput {
    pub y: Vec<[f64; 2]>,
    /// KL(P || Q) before every iteration, then once more for the final layout.
    pub kl_trace: Vec<f64>,
}

impl TsneOutput {
    pub fn initial_kl(&self) -> f64 {
        self.kl_trace[0]
    }

    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("non-empty trace")
    }
}

const ENTROPY_TOL: f64 = 1e-5;
const SEARCH_STEPS: usize = 50;
const MIN_GAIN: f64 = 0.01;

fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    });
    d
}

/// Copies `x`, nudging any row that nearly coincides with an earlier one.
fn jitter_duplicates(x: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let scale = x
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0)
        * 1e-6;
    let noise = Normal::new(0.0, scale).expect("positive scale");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    for row in x {
        let mut row = row.clone();
        while out.iter().any(|prev| {
            prev.iter().zip(&row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < 1e-12
        }) {
            row.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        out.push(row);
    }
    out
}

/// Row-stochastic Gaussian affinities, each row calibrated by binary search
/// on its precision so that its entropy matches ln(perplexity).
pub fn conditional_probabilities(x: &[Vec<f64>], perplexity: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if let Some(r) = x.iter().find(|r| r.len() != x[0].len()) {
        return Err(Error::ShapeMismatch(format!("row of {} values, expected {}", r.len(), x[0].len())));
    }
    let d = squared_distances(x);
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    p.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let di = &d[i * n..(i + 1) * n];
        let dmin = (0..n).filter(|&j| j != i).map(|j| di[j]).fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..SEARCH_STEPS {
            let h = row_entropy(di, i, dmin, beta, row);
            let diff = h - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
        }
        row_entropy(di, i, dmin, beta, row);
    });
    Ok(p)
}

/// Fills `row` with normalized exp(-beta (d - dmin)) and returns its entropy.
fn row_entropy(d: &[f64], i: usize, dmin: f64, beta: f64, row: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (p, &dj)) in row.iter_mut().zip(d).enumerate() {
        if j == i {
            *p = 0.0;
            continue;
        }
        let shifted = dj - dmin;
        *p = (-beta * shifted).exp();
        sum += *p;
        weighted += shifted * *p;
    }
    for p in row.iter_mut() {
        *p /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Symmetrized joint affinities (p_j|i + p_i|j) / 2N.
pub fn joint_probabilities(x: &[Vec<f64>], perplexity: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let cond = conditional_probabilities(x, perplexity)?;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    Ok(p)
}

/// Student-t kernel 1 / (1 + |y_i - y_j|²) with a zero diagonal, and its sum.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            if i != j {
                let (dx, dy) = (y[i][0] - y[j][0], y[i][1] - y[j][1]);
                *out = 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    });
    let sum = num.par_chunks(n).map(|r| r.iter().sum::<f64>()).collect::<Vec<_>>().iter().sum();
    (num, sum)
}

fn kl_from_kernel(p: &[f64], num: &[f64], sum: f64) -> f64 {
    let n = (p.len() as f64).sqrt() as usize;
    p.par_chunks(n)
        .zip(num.par_chunks(n))
        .map(|(pr, qr)| {
            pr.iter()
                .zip(qr)
                .filter(|(&pij, _)| pij > 0.0)
                .map(|(&pij, &q)| pij * (pij / (q / sum).max(f64::MIN_POSITIVE)).ln())
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// KL(P || Q) of a layout against joint affinities `p` (N×N, row-major).
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> Result<f64> {
    if p.len() != y.len() * y.len() {
        return Err(Error::ShapeMismatch(format!("{} affinities for {} points", p.len(), y.len())));
    }
    let (num, sum) = student_kernel(y);
    Ok(kl_from_kernel(p, &num, sum))
}

/// Embeds the rows of `x` in two dimensions.
pub fn tsne(x: &[Vec<f64>], config: &TsneConfig) -> Result<TsneOutput> {
    let n = x.len();
    config.validate(n)?;
    let x = jitter_duplicates(x, config.seed);
    let p = joint_probabilities(&x, config.perplexity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-4).expect("positive std");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = Vec::with_capacity(config.iterations + 1);

    for iter in 0..config.iterations {
        let (num, sum) = student_kernel(&y);
        kl_trace.push(kl_from_kernel(&p, &num, sum));
        let exaggeration = if iter < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };

        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    let w = (exaggeration * p[i * n + j] - num[i * n + j] / sum) * num[i * n + j];
                    g[0] += w * (y[i][0] - y[j][0]);
                    g[1] += w * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();

        for i in 0..n {
            for c in 0..2 {
                let gain = &mut gains[i][c];
                *gain = if (grad[i][c] > 0.0) != (velocity[i][c] > 0.0) {
                    *gain + 0.2
                } else {
                    *gain * 0.8
                };
                *gain = gain.max(MIN_GAIN);
                velocity[i][c] = momentum * velocity[i][c] - config.learning_rate * *gain * grad[i][c];
                y[i][c] += velocity[i][c];
            }
        }
        for c in 0..2 {
            let mean = y.iter().map(|p| p[c]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[c] -= mean);
        }
    }
    kl_trace.push(kl_divergence(&p, &y)?);
    if kl_trace.iter().any(|k| !k.is_finite()) || y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("t-SNE diverged".into()));
    }
    Ok(TsneOutput { y, kl_trace })
}
