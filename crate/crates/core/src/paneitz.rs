//! Round-sphere Paneitz operator, its Green kernel and the potential `L`.
//!
//! On the round `S^4` with `Delta <= 0` the operator is `Delta^2 - 2 Delta`,
//! diagonal on zonal harmonics with eigenvalue `k(k+1)(k+2)(k+3)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::quadrature::{gauss_legendre_on, gegenbauer};
use crate::sphere::{
    laplace_eigenvalue, zonal_harmonic_at_pole, zonal_series_jet, ZonalField, ZonalGrid,
    VOLUME_S4,
};

/// Coefficient of the logarithmic singularity of the Green kernel.
pub const LOG_COEFF: f64 = 1.0 / (8.0 * PI * PI);

/// Smallest distance at which kernel tables are tabulated.
pub const D_MIN: f64 = 1e-3;

const MEAN_TOL: f64 = 1e-9;

/// Eigenvalue of the round Paneitz operator on degree-`k` harmonics.
pub fn paneitz_eigenvalue(k: usize) -> f64 {
    let l = laplace_eigenvalue(k);
    l * l + 2.0 * l
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaneitzSpectrum {
    mu: Vec<f64>,
}

impl PaneitzSpectrum {
    pub fn new(k_max: usize) -> Self {
        Self {
            mu: (0..=k_max).map(paneitz_eigenvalue).collect(),
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,mu_k\n");
        for (k, m) in self.mu.iter().enumerate() {
            let _ = writeln!(s, "{k},{m:.17e}");
        }
        s
    }
}

pub fn paneitz_apply(u: &ZonalField) -> ZonalField {
    u.spectral_multiply(paneitz_eigenvalue)
}

/// Solves `P u = f` for the mean-zero `u`; `f` must integrate to zero.
pub fn paneitz_solve(f: &ZonalField) -> Result<ZonalField> {
    let total = f.integrate();
    if total.abs() > MEAN_TOL {
        return Err(GeoError::Solvability { mean: total / VOLUME_S4 });
    }
    Ok(potential_l(f))
}

/// `L eta = int G(., y) eta(y) dv(y)` computed spectrally.
///
/// The degree-zero part of `eta` is discarded, matching the mean-zero
/// normalisation of the kernel.
pub fn potential_l(eta: &ZonalField) -> ZonalField {
    eta.spectral_multiply(|k| if k == 0 { 0.0 } else { 1.0 / paneitz_eigenvalue(k) })
}

/// Integral of a zonal band-limited function over the geodesic sphere of
/// radius `delta` about the point with polar angle `theta_x`, divided by
/// `sin^3 delta`. Exact for band-limited input when `beta_nodes` exceeds
/// half the band.
pub fn orbit_integral(coeffs: &[f64], theta_x: f64, delta: f64, beta: &[(f64, f64)]) -> f64 {
    let (ct, st) = (theta_x.cos(), theta_x.sin());
    let (cd, sd) = (delta.cos(), delta.sin());
    beta.iter()
        .map(|&(b, w)| {
            let c = (ct * cd - st * sd * b.cos()).clamp(-1.0, 1.0);
            w * zonal_series_jet::<1>(coeffs, c)[0]
        })
        .sum()
}

/// Gauss–Legendre rule in the orbit angle with the `4 pi sin^2` weight folded in.
pub fn orbit_rule(n: usize) -> Vec<(f64, f64)> {
    let (b, w) = gauss_legendre_on(n, 0.0, PI);
    b.into_iter()
        .zip(w)
        .map(|(b, w)| (b, 4.0 * PI * b.sin().powi(2) * w))
        .collect()
}

/// Zonal Green kernel of the round Paneitz operator, normalised to mean zero.
///
/// The kernel is split as `G = LOG_COEFF * log(1 / chord) + h_chord` where
/// `chord = 2 sin(d/2)`. The smooth part `h_chord` is expanded in zonal
/// harmonics; the logarithm is applied exactly.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    truncation: usize,
    // zonal coefficients of h_chord about the north pole
    h_coeffs: Vec<f64>,
    distances: Vec<f64>,
    g_values: Vec<f64>,
    h_values: Vec<f64>,
}

/// Zonal coefficients of `LOG_COEFF * log(1/(2 sin(theta/2)))` for `k <= k_max`.
pub fn chordal_log_coefficients(k_max: usize, nodes: usize) -> Vec<f64> {
    // t = theta^(1/2) substitution removes the log singularity at theta = 0
    let (t, w) = gauss_legendre_on(nodes, 0.0, PI.sqrt());
    let mut out = vec![0.0; k_max + 1];
    for (&ti, &wi) in t.iter().zip(&w) {
        let th = ti * ti;
        let jac = 2.0 * ti;
        let lg = -LOG_COEFF * (2.0 * (0.5 * th).sin()).ln();
        let weight = wi * jac * 2.0 * PI * PI * th.sin().powi(3) * lg;
        let c = gegenbauer(k_max, 1.5, th.cos());
        for (k, o) in out.iter_mut().enumerate() {
            let kf = k as f64;
            let norm = (2.0 * PI * PI * (kf + 1.0) * (kf + 2.0) / (kf + 1.5)).sqrt();
            *o += weight * c[k] / norm;
        }
    }
    out
}

impl GreenKernel {
    pub fn new(truncation: usize) -> Result<Self> {
        Self::with_grid(truncation, 400)
    }

    /// Builds the kernel and tabulates `G` and `h` on `n_dist` log-spaced
    /// distances in `[D_MIN, pi]`.
    pub fn with_grid(truncation: usize, n_dist: usize) -> Result<Self> {
        if truncation < 16 {
            return Err(GeoError::Resolution(format!(
                "green kernel needs truncation >= 16, got {truncation}"
            )));
        }
        let nodes = (4096).max(8 * truncation);
        let log_c = chordal_log_coefficients(truncation, nodes);
        let h_coeffs: Vec<f64> = (0..=truncation)
            .map(|k| {
                let g = if k == 0 {
                    0.0
                } else {
                    zonal_harmonic_at_pole(k) / paneitz_eigenvalue(k)
                };
                g - log_c[k]
            })
            .collect();
        let n = n_dist.max(2);
        let (lo, hi) = (D_MIN.ln(), PI.ln());
        let distances: Vec<f64> = (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect();
        let mut kernel = Self {
            truncation,
            h_coeffs,
            distances,
            g_values: Vec::new(),
            h_values: Vec::new(),
        };
        kernel.h_values = kernel.distances.iter().map(|&d| kernel.h(d)).collect();
        kernel.g_values = kernel.distances.iter().map(|&d| kernel.g(d)).collect();
        Ok(kernel)
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_values
    }

    /// Smooth part relative to the chordal logarithm.
    pub fn h_chord(&self, d: f64) -> f64 {
        zonal_series_jet::<1>(&self.h_coeffs, d.cos())[0]
    }

    /// Bounded remainder `h(d) = G(d) - LOG_COEFF * log(1/d)`.
    pub fn h(&self, d: f64) -> f64 {
        let ratio = if d < 1e-6 {
            1.0 - d * d / 24.0
        } else {
            2.0 * (0.5 * d).sin() / d
        };
        self.h_chord(d) - LOG_COEFF * ratio.ln()
    }

    /// Green kernel as a function of geodesic distance.
    pub fn g(&self, d: f64) -> f64 {
        LOG_COEFF * (1.0 / d).ln() + self.h(d)
    }

    pub fn sup_abs_h(&self) -> f64 {
        self.h_values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("d,G,h\n");
        for ((d, g), h) in self.distances.iter().zip(&self.g_values).zip(&self.h_values) {
            let _ = writeln!(s, "{d:.17e},{g:.17e},{h:.17e}");
        }
        s
    }
}

pub fn green_kernel(truncation: usize) -> Result<GreenKernel> {
    GreenKernel::new(truncation)
}

/// `L eta` by direct quadrature of the kernel in geodesic polar coordinates
/// around each node. Independent of the spectral route except for the
/// evaluation of `eta` itself.
pub fn potential_l_quadrature(eta: &ZonalField, kernel: &GreenKernel) -> ZonalField {
    let grid: &Arc<ZonalGrid> = eta.grid();
    let band = grid.k_max();
    let beta = orbit_rule(band / 2 + 8);
    // t = delta^(1/2) removes the logarithmic endpoint behaviour
    let (t, w) = gauss_legendre_on(2 * band + 64, 0.0, PI.sqrt());
    let radial: Vec<(f64, f64)> = t
        .iter()
        .zip(&w)
        .map(|(&t, &w)| {
            let d = t * t;
            (d, w * 2.0 * t * d.sin().powi(3) * kernel.g(d))
        })
        .collect();
    let coeffs = eta.coeffs();
    let samples: Vec<f64> = grid
        .theta()
        .par_iter()
        .map(|&th| {
            radial
                .iter()
                .map(|&(d, wd)| wd * orbit_integral(coeffs, th, d, &beta))
                .sum()
        })
        .collect();
    ZonalField::from_samples(grid, samples).expect("same grid")
}

/// `int_{B(x, r)} log(1/d(x,y)) eta(y) dv(y)` for `x` at polar angle `theta_x`.
pub fn log_potential_ball(eta: &ZonalField, theta_x: f64, r: f64) -> f64 {
    let band = eta.grid().k_max();
    let beta = orbit_rule(band / 2 + 8);
    let (t, w) = gauss_legendre_on(2 * band + 64, 0.0, r.sqrt());
    t.iter()
        .zip(&w)
        .map(|(&t, &w)| {
            let d = t * t;
            w * 2.0 * t * d.sin().powi(3) * (1.0 / d).ln()
                * orbit_integral(eta.coeffs(), theta_x, d, &beta)
        })
        .sum()
}
