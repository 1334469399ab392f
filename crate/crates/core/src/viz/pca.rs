//! Principal component analysis via eigendecomposition of the sample
//! covariance, or of the Gram matrix when there are fewer points than
//! dimensions.

use super::eigen::symmetric_eigen;
use crate::error::{ensure_len, Error, Result};
use crate::nn::{dot, norm, Tensor2};

#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// k×D, orthonormal rows.
    pub components: Tensor2,
    /// Top-k eigenvalues of the sample covariance, descending.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// N×k projected coordinates of the fitted points.
    pub coordinates: Vec<Vec<f64>>,
}

impl Pca {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("pca input", self.mean.len(), x.len())?;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self.components.iter_rows().map(|c| dot(c, &centered)).collect())
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vec<f64>> {
        ensure_len("pca coordinates", self.k(), coords.len())?;
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter_rows().zip(coords) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn check_input<R: AsRef<[f64]>>(vectors: &[R], k: usize) -> Result<(usize, usize)> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 points, got {n}")));
    }
    let d = vectors[0].as_ref().len();
    for v in vectors {
        ensure_len("pca input", d, v.as_ref().len())?;
        crate::error::ensure_finite("pca input", v.as_ref())?;
    }
    let max_k = (n - 1).min(d);
    if k == 0 || k > max_k {
        return Err(Error::InvalidArgument(format!("k={k} out of range 1..={max_k}")));
    }
    Ok((n, d))
}

pub fn pca_project<R: AsRef<[f64]>>(vectors: &[R], k: usize) -> Result<Pca> {
    let (n, d) = check_input(vectors, k)?;
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.as_ref().iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let denom = (n - 1) as f64;

    let (all_values, mut components) = if d <= n {
        let mut cov = Tensor2::zeros(d, d);
        for x in &centered {
            cov.add_outer(x, x);
        }
        cov.data_mut().iter_mut().for_each(|c| *c /= denom);
        let eig = symmetric_eigen(&cov)?;
        let comps: Vec<Vec<f64>> = (0..k).map(|i| eig.vector(i)).collect();
        (eig.values, comps)
    } else {
        let mut gram = Tensor2::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let g = dot(&centered[i], &centered[j]) / denom;
                gram.set(i, j, g);
                gram.set(j, i, g);
            }
        }
        let eig = symmetric_eigen(&gram)?;
        let top = eig.values[0].max(0.0);
        let mut comps: Vec<Vec<f64>> = Vec::with_capacity(k);
        for i in 0..k {
            if eig.values[i] <= 1e-12 * top {
                break;
            }
            let u = eig.vector(i);
            let mut c = vec![0.0; d];
            for (x, w) in centered.iter().zip(&u) {
                for (ci, xi) in c.iter_mut().zip(x) {
                    *ci += w * xi;
                }
            }
            let nc = norm(&c);
            c.iter_mut().for_each(|v| *v /= nc);
            comps.push(c);
        }
        complete_basis(&mut comps, d, k);
        (eig.values, comps)
    };

    let total: f64 = all_values.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::InvalidArgument("degenerate input: all points identical".into()));
    }
    for c in &mut components {
        fix_sign(c);
    }
    let eigenvalues: Vec<f64> = all_values[..k].iter().map(|v| v.max(0.0)).collect();
    let explained_variance_ratio = eigenvalues.iter().map(|v| v / total).collect();
    let components = Tensor2::from_rows(&components)?;
    let coordinates = centered
        .iter()
        .map(|x| components.iter_rows().map(|c| dot(c, x)).collect())
        .collect();
    Ok(Pca {
        mean,
        components,
        eigenvalues,
        explained_variance_ratio,
        coordinates,
    })
}

/// Extends `basis` to `k` orthonormal vectors using standard basis
/// directions in index order (for zero-variance components).
fn complete_basis(basis: &mut Vec<Vec<f64>>, d: usize, k: usize) {
    let mut j = 0;
    while basis.len() < k && j < d {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        for _ in 0..2 {
            for b in basis.iter() {
                let p = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nv = norm(&v);
        if nv > 0.5 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
        j += 1;
    }
}
