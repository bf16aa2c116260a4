//! Seeded generators for conformal factors and warped profiles with a
//! prescribed size.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conformal::{conformal_curvature, ConformalRoundMetric};
use crate::error::{GeoError, Result};
use crate::sphere::{ZonalField, ZonalGrid};
use crate::warped::{warped_curvature, WarpedAxisymMetric};

/// Highest zonal degree of generated conformal factors.
pub const FACTOR_DEGREE: usize = 6;

/// Perturbed profile modes of generated warped metrics.
pub const PROFILE_MODES: usize = 4;

/// Band-limited zonal field with coefficients `U(-1, 1) / (1 + k)^2`, `1 <= k <= degree`.
pub fn random_zonal(seed: u64, grid: &Arc<ZonalGrid>, degree: usize) -> ZonalField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degree = degree.min(grid.k_max());
    let mut c = vec![0.0; degree + 1];
    for (k, ck) in c.iter_mut().enumerate().skip(1) {
        *ck = rng.gen_range(-1.0..1.0) / ((1 + k) as f64).powi(2);
    }
    ZonalField::from_coeffs(grid, c).expect("degree within band")
}

/// `eta = 2 Q e^{4w} - 6` with `Q` from the direct curvature formula.
pub fn eta_of(w: &ZonalField) -> Result<ZonalField> {
    let m = ConformalRoundMetric::new(w.clone())?;
    let rep = conformal_curvature(&m);
    let s = rep
        .q
        .iter()
        .zip(m.w().samples())
        .map(|(q, w)| 2.0 * q * (4.0 * w).exp() - 6.0)
        .collect();
    ZonalField::from_samples(w.grid(), s)
}

/// Bisection on `s` in `[0, s_max]` for an increasing `measure(s) = target`.
fn bisect(target: f64, rel: f64, s_max: f64, measure: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let top = measure(s_max)?;
    if top < target {
        return Err(GeoError::Domain(format!(
            "target {target} unreachable; largest attainable is {top:.4e}"
        )));
    }
    let (mut lo, mut hi) = (0.0, s_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = measure(mid)?;
        if ((m - target) / target).abs() < rel {
            return Ok(mid);
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Conformal factor `w` and `eta` with `||eta||_1 = alpha` to relative `1e-8`.
///
/// The shape is fixed by the seed; only the amplitude is searched. The
/// amplitude is capped so that `||w||_inf <= 1`.
pub fn conformal_factor_for_alpha(
    seed: u64,
    grid: &Arc<ZonalGrid>,
    alpha: f64,
) -> Result<(ZonalField, ZonalField)> {
    if alpha == 0.0 {
        let z = ZonalField::zeros(grid);
        return Ok((z.clone(), z));
    }
    if !(alpha > 0.0) {
        return Err(GeoError::Domain(format!("alpha must be non-negative, got {alpha}")));
    }
    let shape = random_zonal(seed, grid, FACTOR_DEGREE);
    let s_max = 1.0 / shape.sup_norm();
    let s = bisect(alpha, 1e-8, s_max, |s| Ok(eta_of(&shape.scale(s))?.l1_norm()))?;
    let w = shape.scale(s);
    let eta = eta_of(&w)?;
    Ok((w, eta))
}

/// Closed profile coefficients on the round length with seeded
/// perturbations of size `amp` in modes `1..PROFILE_MODES`.
fn perturbed_profile(seed: u64, amp: f64) -> Result<WarpedAxisymMetric> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = vec![0.0; PROFILE_MODES];
    let mut h = vec![0.0; PROFILE_MODES];
    for k in 1..PROFILE_MODES {
        let damp = 1.0 / (k * k) as f64;
        f[k] = amp * damp * rng.gen_range(-1.0..1.0);
        h[k] = amp * damp * rng.gen_range(-1.0..1.0);
    }
    // closure at the round length: sum (-1)^k (2k+1) f_k = 1 and sum (2k+1) h_k = 1
    let odd = |k: usize| (2 * k + 1) as f64;
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    f[0] = 1.0 - (1..PROFILE_MODES).map(|k| sign(k) * odd(k) * f[k]).sum::<f64>();
    h[0] = 1.0 - (1..PROFILE_MODES).map(|k| odd(k) * h[k]).sum::<f64>();
    WarpedAxisymMetric::new(std::f64::consts::FRAC_PI_2, f, h)
}

/// Warped metric with `int |W|^2 = beta` to relative `1e-3`.
pub fn warped_for_beta(seed: u64, beta: f64) -> Result<WarpedAxisymMetric> {
    if beta == 0.0 {
        return Ok(WarpedAxisymMetric::round());
    }
    if !(beta > 0.0) {
        return Err(GeoError::Domain(format!("beta must be non-negative, got {beta}")));
    }
    let measure = |a: f64| -> Result<f64> {
        Ok(warped_curvature(&perturbed_profile(seed, a)?, 256).integrals.beta)
    };
    let amp = bisect(beta, 1e-3, 0.2, measure)?;
    perturbed_profile(seed, amp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_alpha_is_zero_factor() {
        let g = ZonalGrid::new(64, 24).unwrap();
        let (w, eta) = conformal_factor_for_alpha(1, &g, 0.0).unwrap();
        assert_eq!(w.sup_norm(), 0.0);
        assert_eq!(eta.sup_norm(), 0.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let g = ZonalGrid::new(64, 24).unwrap();
        let (a, _) = conformal_factor_for_alpha(7, &g, 0.05).unwrap();
        let (b, _) = conformal_factor_for_alpha(7, &g, 0.05).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn alpha_target_hit() {
        let g = ZonalGrid::new(64, 24).unwrap();
        let (_, eta) = conformal_factor_for_alpha(3, &g, 0.05).unwrap();
        assert!((eta.l1_norm() / 0.05 - 1.0).abs() < 1e-6);
        assert!(eta.integrate().abs() < 1e-9);
    }

    #[test]
    fn beta_target_within_five_percent() {
        let m = warped_for_beta(11, 0.01).unwrap();
        let b = warped_curvature(&m, 256).integrals.beta;
        assert!((b / 0.01 - 1.0).abs() < 0.05, "beta = {b}");
    }

    #[test]
    fn unreachable_alpha_reported() {
        let g = ZonalGrid::new(64, 24).unwrap();
        assert!(conformal_factor_for_alpha(3, &g, 1e6).is_err());
    }
}
