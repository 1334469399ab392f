use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Gradient magnitudes below this are compared in absolute terms. Central
/// differences at `FD_STEP` on an O(1) loss carry about 1e-9 of round-off,
/// so a 1e-5 relative tolerance resolves absolute errors down to 1e-8.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the analytic gradient returned by `loss_and_grad` against central
/// finite differences at every coordinate of `params`.
///
/// Relative error per coordinate is `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn gradient_check<F>(mut loss_and_grad: F, params: &[f64], tolerance: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (loss, analytic) = loss_and_grad(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("gradient check loss".into()));
    }
    crate::error::ensure_len("analytic gradient", params.len(), analytic.len())?;

    let mut probe = params.to_vec();
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut worst = 0;
    for i in 0..params.len() {
        probe[i] = params[i] + FD_STEP;
        let (plus, _) = loss_and_grad(&probe)?;
        probe[i] = params[i] - FD_STEP;
        let (minus, _) = loss_and_grad(&probe)?;
        probe[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite("gradient check loss".into()));
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        max_abs = max_abs.max(abs);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    Ok(GradCheckReport {
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        worst_index: worst,
        checked: params.len(),
        tolerance,
        passed: max_rel < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(p: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((p.iter().map(|x| x * x * x).sum(), p.iter().map(|x| 3.0 * x * x).collect()))
    }

    #[test]
    fn passes_exact_gradient() {
        let r = gradient_check(quadratic, &[0.5, -1.2, 2.0], 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn flags_scaled_gradient() {
        let corrupt = |p: &[f64]| {
            let (l, g) = quadratic(p)?;
            Ok((l, g.into_iter().map(|v| v * 1.01).collect()))
        };
        let r = gradient_check(corrupt, &[0.5, -1.2, 2.0], 1e-5).unwrap();
        assert!(!r.passed);
        assert!(r.max_relative_error > 5e-3);
    }

    #[test]
    fn flags_small_error_on_tiny_gradient() {
        // gradient of 1e-4 reported with an absolute error of 1e-7
        let offset = |p: &[f64]| Ok((1e-4 * p[0], vec![1e-4 + 1e-7]));
        let r = gradient_check(offset, &[0.3], 1e-5).unwrap();
        assert!(!r.passed, "{r:?}");
    }

    #[test]
    fn non_finite_loss_is_error() {
        let bad = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(matches!(gradient_check(bad, &[1.0], 1e-5), Err(Error::NonFinite(_))));
    }
}
