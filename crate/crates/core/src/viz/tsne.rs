//! Exact O(N²) t-SNE.

use rand_distr::{Distribution, Normal};

use crate::error::{ensure_finite, ensure_len, Error, Result};

#[derive(Debug, Clone)]
pub struct TsneConfig {
    /// `None` picks `default_perplexity(n)`.
    pub perplexity: Option<f64>,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub init_scale: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: None,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            init_scale: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tsne {
    pub points: Vec<[f64; 2]>,
    pub perplexity: f64,
    pub initial_kl: f64,
    pub final_kl: f64,
}

pub fn default_perplexity(n: usize) -> f64 {
    30f64.min((n as f64 - 1.0) / 3.0 - 1.0)
}

fn squared_distances<R: AsRef<[f64]>>(x: &[R]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x[i]
                .as_ref()
                .iter()
                .zip(x[j].as_ref())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional row for point `i` at precision `beta`; returns the entropy
/// in nats. `row[i]` is left at zero.
fn conditional_row(dist: &[f64], i: usize, beta: f64, row: &mut [f64]) -> f64 {
    let n = row.len();
    // shift by the nearest neighbour distance so the largest weight is 1
    let min_d = (0..n)
        .filter(|&j| j != i)
        .map(|j| dist[j])
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for j in 0..n {
        if j == i {
            row[j] = 0.0;
            continue;
        }
        let w = (-(dist[j] - min_d) * beta).exp();
        row[j] = w;
        sum += w;
        weighted += (dist[j] - min_d) * w;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Symmetric joint affinities P (row-major N×N, zero diagonal, sums to 1).
pub fn joint_affinities<R: AsRef<[f64]>>(x: &[R], perplexity: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let target = perplexity.ln();
    let dist = squared_distances(x);
    let mut cond = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let di = &dist[i * n..(i + 1) * n];
        let mut beta = 1.0;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..200 {
            let h = conditional_row(di, i, beta, &mut row);
            if !h.is_finite() {
                return Err(Error::NonFinite(format!("t-SNE entropy for point {i}")));
            }
            let diff = h - target;
            if diff.abs() < 1e-10 {
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
        cond[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut p = vec![0.0; n * n];
    let scale = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / scale;
        }
    }
    ensure_finite("t-SNE affinities", &p)?;
    Ok(p)
}

/// Student-t kernel numerators and their sum over ordered pairs.
fn low_dim_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let (num, sum) = low_dim_kernel(y);
    p.iter()
        .zip(&num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &qn)| pij * (pij / (qn / sum).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

pub fn tsne_project<R: AsRef<[f64]>>(x: &[R], config: &TsneConfig, seed: u64) -> Result<Tsne> {
    let n = x.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 4 points, got {n}")));
    }
    let d = x[0].as_ref().len();
    for v in x {
        ensure_len("t-SNE input", d, v.as_ref().len())?;
        ensure_finite("t-SNE input", v.as_ref())?;
    }
    let perplexity = config.perplexity.unwrap_or_else(|| default_perplexity(n));
    let max_perp = (n as f64 - 1.0) / 3.0;
    if !(perplexity > 1.0 && perplexity < max_perp) {
        return Err(Error::InvalidArgument(format!(
            "perplexity {perplexity} infeasible for {n} points (need 1 < perplexity < {max_perp:.3})"
        )));
    }
    let p = joint_affinities(x, perplexity)?;

    let mut rng = crate::nn::seeded_rng(seed);
    let normal = Normal::new(0.0, config.init_scale).expect("positive init scale");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let initial_kl = kl_divergence(&p, &y);

    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0; 2]; n];
    for iter in 0..config.iterations {
        let exag = if iter < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.exaggeration_iters {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (num, sum) = low_dim_kernel(&y);
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = i * n + j;
                let m = (exag * p[k] - num[k] / sum) * num[k];
                g[0] += m * (y[i][0] - y[j][0]);
                g[1] += m * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for c in 0..2 {
                let same_sign = (grad[i][c] > 0.0) == (velocity[i][c] > 0.0);
                gains[i][c] = if same_sign { gains[i][c] * 0.8 } else { gains[i][c] + 0.2 };
                gains[i][c] = gains[i][c].max(0.01);
                velocity[i][c] = momentum * velocity[i][c] - config.learning_rate * gains[i][c] * grad[i][c];
                y[i][c] += velocity[i][c];
            }
        }
        let mut mean = [0.0; 2];
        for pt in &y {
            mean[0] += pt[0];
            mean[1] += pt[1];
        }
        for pt in &mut y {
            pt[0] -= mean[0] / n as f64;
            pt[1] -= mean[1] / n as f64;
        }
        if y.iter().any(|pt| !pt[0].is_finite() || !pt[1].is_finite()) {
            return Err(Error::NonFinite(format!("t-SNE coordinates at iteration {iter}")));
        }
    }
    let final_kl = kl_divergence(&p, &y);
    if !final_kl.is_finite() || final_kl >= initial_kl {
        return Err(Error::NonFinite(format!(
            "t-SNE failed to reduce KL divergence ({initial_kl} -> {final_kl})"
        )));
    }
    Ok(Tsne {
        points: y,
        perplexity,
        initial_kl,
        final_kl,
    })
}
