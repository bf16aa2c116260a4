//! Pointwise curvature fields and their integrals for either metric class.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{GeoError, Result};

/// `16 pi^2`, the Gauss–Bonnet total of `S^4` in the normalisation used here.
pub const GAUSS_BONNET_S4: f64 = 16.0 * PI * PI;

/// Default relative spread of `R` accepted as "constant".
pub const YAMABE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureIntegrals {
    /// `int |W|^2 dv`
    pub beta: f64,
    /// `int |B|^2 dv`
    pub gamma: f64,
    /// `int |E|^2 dv`
    pub e2: f64,
    pub q_total: f64,
    pub r_total: f64,
    pub gauss_bonnet: f64,
    pub volume: f64,
}

/// Curvature fields sampled at quadrature nodes together with the
/// volume weights of the metric itself.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    /// Node coordinate: polar angle for conformal metrics, arclength for warped ones.
    pub coordinate: Vec<f64>,
    pub volume_weights: Vec<f64>,
    pub r: Vec<f64>,
    pub norm_e2: Vec<f64>,
    pub norm_w2: Vec<f64>,
    pub norm_b2: Vec<f64>,
    pub q: Vec<f64>,
    pub integrals: CurvatureIntegrals,
}

impl CurvatureReport {
    pub fn new(
        coordinate: Vec<f64>,
        volume_weights: Vec<f64>,
        r: Vec<f64>,
        norm_e2: Vec<f64>,
        norm_w2: Vec<f64>,
        norm_b2: Vec<f64>,
        q: Vec<f64>,
    ) -> Self {
        let dot = |f: &[f64]| -> f64 { volume_weights.iter().zip(f).map(|(w, v)| w * v).sum() };
        let beta = dot(&norm_w2);
        let e2 = dot(&norm_e2);
        let r2: Vec<f64> = r.iter().map(|v| v * v / 24.0).collect();
        let integrals = CurvatureIntegrals {
            beta,
            gamma: dot(&norm_b2),
            e2,
            q_total: dot(&q),
            r_total: dot(&r),
            gauss_bonnet: beta - 0.5 * e2 + dot(&r2),
            volume: volume_weights.iter().sum(),
        };
        Self {
            coordinate,
            volume_weights,
            r,
            norm_e2,
            norm_w2,
            norm_b2,
            q,
            integrals,
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.volume_weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn mean_r(&self) -> f64 {
        self.integrals.r_total / self.integrals.volume
    }

    /// `(max R - min R) / |mean R|`.
    pub fn r_spread(&self) -> f64 {
        let (lo, hi) = self
            .r
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        (hi - lo) / self.mean_r().abs()
    }

    /// `sup |R - Rbar|`.
    pub fn r_deviation(&self) -> f64 {
        let m = self.mean_r();
        self.r.iter().fold(0.0, |acc, v| acc.max((v - m).abs()))
    }

    /// `int |E|^4 dv`
    pub fn e4(&self) -> f64 {
        self.integrate(&self.norm_e2.iter().map(|v| v * v).collect::<Vec<_>>())
    }

    /// `int |W|^4 dv`
    pub fn w4(&self) -> f64 {
        self.integrate(&self.norm_w2.iter().map(|v| v * v).collect::<Vec<_>>())
    }

    pub fn gauss_bonnet_error(&self) -> f64 {
        (self.integrals.gauss_bonnet - GAUSS_BONNET_S4).abs() / GAUSS_BONNET_S4
    }

    /// One row per node: `coord,weight,R,E2,W2,B2,Q`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("coord,weight,R,E2,W2,B2,Q\n");
        for i in 0..self.r.len() {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.coordinate[i],
                self.volume_weights[i],
                self.r[i],
                self.norm_e2[i],
                self.norm_w2[i],
                self.norm_b2[i],
                self.q[i]
            );
        }
        s
    }
}

/// Lower bound `sqrt(24 (16 pi^2 - beta))` on the Yamabe constant and the
/// upper bound from the constant test function, for a metric with constant `R`.
pub fn yamabe_bounds(rep: &CurvatureReport) -> Result<(f64, f64)> {
    yamabe_bounds_with_tol(rep, YAMABE_TOL)
}

pub fn yamabe_bounds_with_tol(rep: &CurvatureReport, tol: f64) -> Result<(f64, f64)> {
    let spread = rep.r_spread();
    if !(spread <= tol) {
        return Err(GeoError::NotYamabe { spread });
    }
    let lower = (24.0 * (GAUSS_BONNET_S4 - rep.integrals.beta)).max(0.0).sqrt();
    let upper = rep.integrals.r_total / rep.integrals.volume.sqrt();
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::VOLUME_S4;

    fn constant_report(r: f64, beta_density: f64) -> CurvatureReport {
        let n = 10;
        let w = vec![VOLUME_S4 / n as f64; n];
        CurvatureReport::new(
            vec![0.0; n],
            w,
            vec![r; n],
            vec![0.0; n],
            vec![beta_density; n],
            vec![0.0; n],
            vec![r * r / 48.0; n],
        )
    }

    #[test]
    fn round_bounds_are_equal() {
        let (lo, hi) = yamabe_bounds(&constant_report(12.0, 0.0)).unwrap();
        let target = (384.0 * PI * PI).sqrt();
        assert!((lo - target).abs() < 1e-10);
        assert!((hi - target).abs() < 1e-10);
    }

    #[test]
    fn large_beta_clamps_lower_bound() {
        let dens = 2.0 * GAUSS_BONNET_S4 / VOLUME_S4;
        let (lo, _) = yamabe_bounds(&constant_report(12.0, dens)).unwrap();
        assert_eq!(lo, 0.0);
    }

    #[test]
    fn nonconstant_r_rejected() {
        let mut rep = constant_report(12.0, 0.0);
        rep.r[3] = 13.0;
        assert!(matches!(yamabe_bounds(&rep), Err(GeoError::NotYamabe { .. })));
    }

    #[test]
    fn round_gauss_bonnet() {
        let rep = constant_report(12.0, 0.0);
        assert!(rep.gauss_bonnet_error() < 1e-14);
        assert!((rep.integrals.q_total - 8.0 * PI * PI).abs() < 1e-12);
    }
}
