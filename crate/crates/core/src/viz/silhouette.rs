//! Mean silhouette coefficient under Euclidean distance.

use std::collections::BTreeMap;

use crate::error::{ensure_len, Error, Result};

/// Mean over points of (b − a) / max(a, b), where a is the mean distance to
/// the point's own cluster and b the smallest mean distance to another
/// cluster. Points in singleton clusters contribute 0.
pub fn silhouette_score<R: AsRef<[f64]>, L: AsRef<str>>(points: &[R], labels: &[L]) -> Result<f64> {
    let n = points.len();
    ensure_len("silhouette labels", n, labels.len())?;
    if n == 0 {
        return Err(Error::Empty("silhouette of zero points".into()));
    }
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        let next = ids.len();
        ids.entry(l.as_ref()).or_insert(next);
    }
    let k = ids.len();
    if k < 2 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "silhouette needs 2..{n} clusters, got {k}"
        )));
    }
    let cluster: Vec<usize> = labels.iter().map(|l| ids[l.as_ref()]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &cluster {
        sizes[c] += 1;
    }
    let dim = points[0].as_ref().len();
    for p in points {
        ensure_len("silhouette point", dim, p.as_ref().len())?;
    }

    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                let d: f64 = points[i]
                    .as_ref()
                    .iter()
                    .zip(points[j].as_ref())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                sums[cluster[j]] += d;
            }
        }
        let own = cluster[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}
