//! Rotation-equivariant quasiconformal flow on the round `S^4`.
//!
//! A map is a monotone profile `F: [0, pi] -> [0, pi]` acting on the polar
//! angle. The flow field at each step is `v(x) = int V(x, y) eta(y) dv(y)`,
//! built from the Green kernel with the distance replaced by the smoothed
//! quantity `rho`, and the map is advanced by integrating `v` for time `1/k`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::conformal::{meridional_strain, ConformalRoundMetric};
use crate::error::{GeoError, Result};
use crate::paneitz::{orbit_rule, potential_l, GreenKernel, LOG_COEFF};
use crate::quadrature::gauss_legendre_on;
use crate::sphere::{bump_psi, geodesic_distance, zonal_series_jet, SpherePoint, ZonalField, ZonalGrid};

/// Cutoff radius `r` in `V`; the field vanishes beyond `r / 2`.
pub const CUTOFF_RADIUS: f64 = PI / 2.0;

/// Smallest admissible slope `F'` at a node.
pub const MIN_SLOPE: f64 = 1e-10;

/// Growth base `C` in the dilatation budget.
pub const BUDGET_BASE: f64 = 2.0;

/// Gauss–Legendre nodes in the orbit angle.
const ORBIT_NODES: usize = 16;

// ---------------------------------------------------------------------------
// Maps and fields

/// Monotone self-map of `[0, pi]` stored as `F(theta) = theta + sin(theta) e(cos theta)`.
#[derive(Debug, Clone)]
pub struct AxisymMap {
    e: ZonalField,
    values: Vec<f64>,
}

impl AxisymMap {
    pub fn identity(grid: &Arc<ZonalGrid>) -> Self {
        Self {
            e: ZonalField::zeros(grid),
            values: grid.theta().to_vec(),
        }
    }

    /// Map with the given values `F(theta_i)` at the grid nodes.
    pub fn from_values(grid: &Arc<ZonalGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GeoError::SizeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        let e = values
            .iter()
            .zip(grid.theta())
            .map(|(f, t)| (f - t) / t.sin())
            .collect();
        let map = Self {
            e: ZonalField::from_samples(grid, e)?,
            values,
        };
        map.check_monotone()?;
        Ok(map)
    }

    pub fn from_fn(grid: &Arc<ZonalGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(grid, grid.theta().iter().map(|&t| f(t)).collect())
    }

    fn check_monotone(&self) -> Result<()> {
        let mut prev = 0.0;
        for (&v, &t) in self.values.iter().zip(self.grid().theta()) {
            if !(v > prev && v < PI) {
                return Err(GeoError::NonMonotone(format!("F({t:.6}) = {v} out of order")));
            }
            prev = v;
            let d = self.derivative(t);
            if !(d > MIN_SLOPE) {
                return Err(GeoError::NonMonotone(format!("F'({t:.6}) = {d:e}")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<ZonalGrid> {
        self.e.grid()
    }

    /// `F` at the grid nodes.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, theta: f64) -> f64 {
        theta + theta.sin() * self.e.jet::<1>(theta.cos())[0]
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        let x = theta.cos();
        let [e0, e1] = self.e.jet::<2>(x);
        1.0 + x * e0 - (1.0 - x * x) * e1
    }

    /// `sin F / sin theta`, with its limit `F'` at the poles.
    pub fn sine_ratio(&self, theta: f64) -> f64 {
        let s = theta.sin();
        if s.abs() < 1e-12 {
            return self.derivative(theta);
        }
        self.eval(theta).sin() / s
    }

    /// Pointwise Jacobian `F' (sin F / sin theta)^3` at the nodes.
    pub fn jacobian(&self) -> ZonalField {
        let j = self
            .grid()
            .theta()
            .iter()
            .zip(&self.values)
            .map(|(&t, &f)| self.derivative(t) * (f.sin() / t.sin()).powi(3))
            .collect();
        ZonalField::from_samples(self.grid(), j).expect("same grid")
    }

    /// Pointwise dilatation `max(F', s)^4 / (F' s^3)` at the nodes.
    pub fn dilatation_field(&self) -> Vec<f64> {
        self.grid()
            .theta()
            .iter()
            .zip(&self.values)
            .map(|(&t, &f)| pointwise_dilatation(self.derivative(t), f.sin() / t.sin()))
            .collect()
    }

    /// Maximal dilatation `K`.
    pub fn dilatation(&self) -> f64 {
        self.dilatation_field().into_iter().fold(1.0, f64::max)
    }

    pub fn min_slope(&self) -> f64 {
        self.grid()
            .theta()
            .iter()
            .map(|&t| self.derivative(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// `F^{-1}(phi)` by safeguarded Newton.
    pub fn inverse_at(&self, phi: f64) -> Result<f64> {
        if !(0.0..=PI).contains(&phi) {
            return Err(GeoError::Domain(format!("angle {phi} outside [0, pi]")));
        }
        let (mut lo, mut hi) = (0.0, PI);
        let mut t = phi;
        for _ in 0..100 {
            let r = self.eval(t) - phi;
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = self.derivative(t);
            let mut next = t - r / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() < 1e-15 {
                return Ok(next);
            }
            t = next;
        }
        if hi - lo < 1e-12 {
            Ok(t)
        } else {
            Err(GeoError::NonMonotone(format!("inversion at {phi} did not converge")))
        }
    }

    pub fn inverse(&self) -> Result<AxisymMap> {
        let v = self
            .grid()
            .theta()
            .iter()
            .map(|&p| self.inverse_at(p))
            .collect::<Result<Vec<_>>>()?;
        AxisymMap::from_values(self.grid(), v)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AxisymMap) -> Result<AxisymMap> {
        let v = inner.values.iter().map(|&t| self.eval(t)).collect();
        AxisymMap::from_values(self.grid(), v)
    }

    /// One row per node: `theta,F,J,K_pointwise`.
    pub fn to_csv(&self) -> String {
        let j = self.jacobian();
        let k = self.dilatation_field();
        let mut s = String::from("theta,F,J,K_pointwise\n");
        for i in 0..self.values.len() {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.grid().theta()[i],
                self.values[i],
                j.samples()[i],
                k[i]
            );
        }
        s
    }
}

fn pointwise_dilatation(fp: f64, s: f64) -> f64 {
    fp.max(s).powi(4) / (fp * s.powi(3))
}

/// Meridional vector field `a(theta) d/dtheta` with `a = sin(theta) b(cos theta)`.
#[derive(Debug, Clone)]
pub struct MeridionalField {
    b: ZonalField,
}

impl MeridionalField {
    pub fn new(b: ZonalField) -> Self {
        Self { b }
    }

    pub fn zeros(grid: &Arc<ZonalGrid>) -> Self {
        Self::new(ZonalField::zeros(grid))
    }

    /// Field from `a` at the grid nodes.
    pub fn from_a_samples(grid: &Arc<ZonalGrid>, a: Vec<f64>) -> Result<Self> {
        let b = a.iter().zip(grid.theta()).map(|(a, t)| a / t.sin()).collect();
        Ok(Self::new(ZonalField::from_samples(grid, b)?))
    }

    pub fn b(&self) -> &ZonalField {
        &self.b
    }

    pub fn a(&self, theta: f64) -> f64 {
        theta.sin() * zonal_series_jet::<1>(self.b.coeffs(), theta.cos())[0]
    }

    /// `a` at the grid nodes.
    pub fn a_samples(&self) -> Vec<f64> {
        let g = self.b.grid();
        g.theta().iter().map(|&t| self.a(t)).collect()
    }

    /// Round divergence `a' + 3 a cot(theta)`.
    pub fn div_at(&self, theta: f64) -> f64 {
        let x = theta.cos();
        let [b0, b1] = zonal_series_jet::<2>(self.b.coeffs(), x);
        4.0 * x * b0 - (1.0 - x * x) * b1
    }

    /// `(a, div a)` at an arbitrary angle.
    fn a_and_div(&self, theta: f64) -> (f64, f64) {
        let (s, x) = theta.sin_cos();
        let [b0, b1] = zonal_series_jet::<2>(self.b.coeffs(), x);
        (s * b0, 4.0 * x * b0 - s * s * b1)
    }
}

/// Sup of the conformal strain norm of `v` and its divergence, both in `metric`.
pub fn strain_and_div(v: &MeridionalField, metric: &ConformalRoundMetric) -> (f64, ZonalField) {
    meridional_strain(&v.b, Some(metric.w()))
}

// ---------------------------------------------------------------------------
// Smoothed distance and the potential field

/// `int psi(s / delta) A(s) sin^3(s) ds` over `[0, delta / 2]`.
fn ball_integral(delta: f64, orbit_avg: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for (a, b, n) in [(0.0, 0.25 * delta, 16), (0.25 * delta, 0.5 * delta, 24)] {
        let (s, w) = gauss_legendre_on(n, a, b);
        for (&si, &wi) in s.iter().zip(&w) {
            total += wi * bump_psi(si / delta) * si.sin().powi(3) * orbit_avg(si);
        }
    }
    total
}

/// `int_{S^3} f(exp_x(t u)) du` and `int_{S^3} f(exp_x(t u)) <u, d/dtheta> du`
/// for a zonal `f` given by coefficients and `x` at polar angle `theta_x`.
fn orbit_moments(coeffs: &[f64], theta_x: f64, t: f64, rule: &[(f64, f64)]) -> (f64, f64) {
    let (ct, st) = (theta_x.cos(), theta_x.sin());
    let (cd, sd) = (t.cos(), t.sin());
    rule.iter().fold((0.0, 0.0), |(m0, m1), &(b, w)| {
        let cb = b.cos();
        let c = (ct * cd - st * sd * cb).clamp(-1.0, 1.0);
        let f = zonal_series_jet::<1>(coeffs, c)[0];
        // beta is measured from d/dtheta
        (m0 + w * f, m1 + w * f * cb)
    })
}

/// `rho(x, y) = (int psi(d(x, z) / d(x, y)) J(z) dv(z))^{1/4}`.
pub fn rho_distance(x: &SpherePoint, y: &SpherePoint, j_phi: &ZonalField) -> Result<f64> {
    let d = geodesic_distance(x, y)?;
    if d == 0.0 {
        return Err(GeoError::ZeroDistance);
    }
    let rule = orbit_rule(ORBIT_NODES);
    let tx = x.polar_angle();
    let c = j_phi.coeffs();
    Ok(ball_integral(d, |s| orbit_moments(c, tx, s, &rule).0).powf(0.25))
}

/// Point with polar angle `theta` in the same orbit direction as `y`.
fn with_polar_angle(y: &SpherePoint, theta: f64) -> SpherePoint {
    let c = y.coords();
    let n = (c[1] * c[1] + c[2] * c[2] + c[3] * c[3] + c[4] * c[4]).sqrt();
    let (s, co) = theta.sin_cos();
    if n == 0.0 {
        return SpherePoint::on_meridian(theta);
    }
    SpherePoint::normalized([co, s * c[1] / n, s * c[2] / n, s * c[3] / n, s * c[4] / n])
        .expect("unit vector")
}

/// `V(x, y) = G~(x, y) psi(d / r) (x - Phi^{-1}(y))` as a tangent vector at `x`.
///
/// `x - Phi^{-1}(y)` is the logarithm at `Phi^{-1}(y)` projected to `T_x`.
pub fn potential_field_v(
    x: &SpherePoint,
    y: &SpherePoint,
    phi: &AxisymMap,
    kernel: &GreenKernel,
) -> Result<[f64; 5]> {
    let pre = with_polar_angle(y, phi.inverse_at(y.polar_angle())?);
    let t = geodesic_distance(x, &pre)?;
    if t >= 0.5 * CUTOFF_RADIUS || t == 0.0 {
        return Ok([0.0; 5]);
    }
    let rho = rho_distance(x, &pre, &phi.jacobian())?;
    let g = LOG_COEFF * (1.0 / rho).ln() + kernel.h(t);
    let dir = x.project_tangent(&pre.log(x)?);
    let c = g * bump_psi(t / CUTOFF_RADIUS);
    Ok(dir.map(|v| c * v))
}

/// Barycentric interpolant on Chebyshev points of the second kind over `[0, b]`.
struct Cheb {
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Cheb {
    fn new(b: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let nodes: Vec<f64> = (0..=n)
            .map(|j| 0.5 * b * (1.0 - (PI * j as f64 / n as f64).cos()))
            .collect();
        let values = nodes.iter().map(|&s| f(s)).collect();
        Self { b, nodes, values }
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.nodes.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=n {
            let d = s - self.nodes[j];
            if d == 0.0 {
                return self.values[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            num += w / d * self.values[j];
            den += w / d;
        }
        debug_assert!(s <= self.b * (1.0 + 1e-12));
        num / den
    }
}

/// Flow field `v(x) = int V(x, y) eta(y) dv(y)` for the current inverse map `phi`.
///
/// With `y = Phi(z)` the integral becomes one over `z` in geodesic polar
/// coordinates around `x`, where `rho(x, z)` depends on `x` and `d(x, z)` only.
pub fn flow_field_v(eta: &ZonalField, phi: &AxisymMap, kernel: &GreenKernel) -> Result<MeridionalField> {
    let grid = eta.grid();
    let jphi = phi.jacobian();
    // (eta ∘ Phi) J_Phi
    let pulled: Vec<f64> = phi
        .values()
        .iter()
        .zip(jphi.samples())
        .map(|(&p, &j)| eta.eval(p) * j)
        .collect();
    let pulled = ZonalField::from_samples(grid, pulled)?;
    let rule = orbit_rule(ORBIT_NODES);
    let tmax = 0.5 * CUTOFF_RADIUS;
    let mut radial = Vec::new();
    for (a, b) in [(0.0, tmax / 8.0), (tmax / 8.0, tmax / 2.0), (tmax / 2.0, tmax)] {
        let (t, w) = gauss_legendre_on(16, a, b);
        radial.extend(t.into_iter().zip(w));
    }
    let hvals: Vec<f64> = radial.iter().map(|&(t, _)| kernel.h(t)).collect();
    let a: Vec<f64> = grid
        .theta()
        .par_iter()
        .map(|&tx| {
            let avg = Cheb::new(0.5 * tmax, 40, |s| orbit_moments(jphi.coeffs(), tx, s, &rule).0);
            radial
                .iter()
                .zip(&hvals)
                .map(|(&(t, w), &h)| {
                    let rho4 = ball_integral(t, |s| avg.eval(s));
                    let g = -0.25 * LOG_COEFF * rho4.ln() + h;
                    let m1 = orbit_moments(pulled.coeffs(), tx, t, &rule).1;
                    // projected log vector is -t cos(t) u
                    -w * t.sin().powi(3) * bump_psi(t / CUTOFF_RADIUS) * g * t * t.cos() * m1
                })
                .sum()
        })
        .collect();
    MeridionalField::from_a_samples(grid, a)
}

// ---------------------------------------------------------------------------
// Time stepping

/// RK4 step of `d theta / dt = a(theta)` together with `d I / dt = div v(theta)`.
fn rk4(v: &MeridionalField, theta: f64, integral: f64, dt: f64) -> (f64, f64) {
    let f = |t: f64| v.a_and_div(t.clamp(0.0, PI));
    let (k1, d1) = f(theta);
    let (k2, d2) = f(theta + 0.5 * dt * k1);
    let (k3, d3) = f(theta + 0.5 * dt * k2);
    let (k4, d4) = f(theta + dt * k3);
    (
        theta + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
        integral + dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4),
    )
}

/// Composes `F` with the time-`dt` flow of `v`.
pub fn advance_step(f: &AxisymMap, v: &MeridionalField, dt: f64) -> Result<AxisymMap> {
    if !(dt > 0.0) {
        return Err(GeoError::Domain(format!("time step must be positive, got {dt}")));
    }
    let vals = f.values().iter().map(|&t| rk4(v, t, 0.0, dt).0).collect();
    AxisymMap::from_values(f.grid(), vals)
}

#[derive(Debug, Clone, Copy)]
pub struct QcOptions {
    /// Number of time steps `k`.
    pub steps: usize,
    /// Spectral truncation of the Green kernel.
    pub kernel_truncation: usize,
    /// Largest number of step halvings before giving up.
    pub max_halvings: usize,
}

impl Default for QcOptions {
    fn default() -> Self {
        Self {
            steps: 16,
            kernel_truncation: 64,
            max_halvings: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QcStep {
    pub step: usize,
    pub t: f64,
    pub strain_sup: f64,
    /// Maximal dilatation `H` after the step.
    pub dilatation: f64,
    /// `sup |log J_F - int div v ds|` after the step.
    pub jacobian_residual: f64,
    /// `sup |(L eta) ∘ Phi - div v / 4|` for the field used in the step.
    pub b_inf: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone)]
pub struct QcRun {
    pub map: AxisymMap,
    pub trace: Vec<QcStep>,
    /// `int_0^1 div v_t(F_t(x)) dt` at each node.
    pub div_integral: Vec<f64>,
    pub eta_l1: f64,
}

impl QcRun {
    /// `step,t,strain_sup,dilatation,jacobian_residual,b_inf`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("step,t,strain_sup,dilatation,jacobian_residual,b_inf\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{:.6},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.step, r.t, r.strain_sup, r.dilatation, r.jacobian_residual, r.b_inf
            );
        }
        s
    }

    /// `log K(F_t) - 4 t sup_{s <= t} strain` over the trace; non-positive when the bound holds.
    pub fn dilatation_excess(&self) -> f64 {
        let mut sup_strain: f64 = 0.0;
        self.trace
            .iter()
            .map(|r| {
                sup_strain = sup_strain.max(r.strain_sup);
                r.dilatation.ln() - 4.0 * r.t * sup_strain
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_jacobian_residual(&self) -> f64 {
        self.trace.iter().fold(0.0, |m, r| m.max(r.jacobian_residual))
    }
}

fn log_jacobian_residual(f: &AxisymMap, integral: &[f64]) -> f64 {
    f.jacobian()
        .samples()
        .iter()
        .zip(integral)
        .fold(0.0, |m, (j, i)| m.max((j.ln() - i).abs()))
}

/// The discretised iteration: at step `j` build `Phi = F_{j/k}^{-1}`, the
/// field `v`, and flow for time `1 / k`.
pub fn run_qc_iteration(eta: &ZonalField, opt: QcOptions) -> Result<QcRun> {
    let k = opt.steps.max(1);
    let grid = eta.grid();
    let alpha = eta.l1_norm();
    dilatation_budget(BUDGET_BASE, 4.0 * alpha)?;
    let kernel = GreenKernel::new(opt.kernel_truncation)?;
    let l_eta = potential_l(eta);
    let round = ConformalRoundMetric::round(grid);
    let mut f = AxisymMap::identity(grid);
    let mut integral = vec![0.0; grid.len()];
    let mut trace = Vec::with_capacity(k);
    let h = 1.0 / k as f64;
    for j in 0..k {
        let phi = f.inverse()?;
        let v = flow_field_v(eta, &phi, &kernel)?;
        let (strain, div) = strain_and_div(&v, &round);
        let b_inf = phi
            .values()
            .iter()
            .zip(div.samples())
            .fold(0.0f64, |m, (&p, &d)| m.max((l_eta.eval(p) - 0.25 * d).abs()));
        let log_k0 = f.dilatation().ln();
        let mut accepted = None;
        for halving in 0..=opt.max_halvings {
            let n = 1usize << halving;
            let dt = h / n as f64;
            let mut pos = f.values().to_vec();
            let mut acc = integral.clone();
            for _ in 0..n {
                for (p, i) in pos.iter_mut().zip(acc.iter_mut()) {
                    (*p, *i) = rk4(&v, *p, *i, dt);
                }
            }
            let Ok(next) = AxisymMap::from_values(grid, pos) else {
                continue;
            };
            let growth = next.dilatation().ln() - log_k0;
            if growth <= 8.0 * strain * h + 1e-12 {
                accepted = Some((next, acc, n));
                break;
            }
        }
        let Some((next, acc, n)) = accepted else {
            return Err(GeoError::NonMonotone(format!(
                "step {j} rejected after {} halvings",
                opt.max_halvings
            )));
        };
        f = next;
        integral = acc;
        trace.push(QcStep {
            step: j + 1,
            t: (j + 1) as f64 * h,
            strain_sup: strain,
            dilatation: f.dilatation(),
            jacobian_residual: log_jacobian_residual(&f, &integral),
            b_inf,
            substeps: n,
        });
    }
    Ok(QcRun {
        map: f,
        trace,
        div_integral: integral,
        eta_l1: alpha,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics

#[derive(Debug, Clone)]
pub struct MapDiagnostics {
    pub j: ZonalField,
    pub k: f64,
    /// Lipschitz constant of `F` from `g1` to `g0`.
    pub l_fwd: f64,
    /// Lipschitz constant of `F^{-1}` from `g0` to `g1`.
    pub l_inv: f64,
}

impl MapDiagnostics {
    pub fn bilipschitz(&self) -> f64 {
        self.l_fwd.max(self.l_inv)
    }
}

pub fn map_diagnostics(f: &AxisymMap, g1: &ConformalRoundMetric, g0: &ConformalRoundMetric) -> MapDiagnostics {
    let grid = f.grid();
    let mut l_fwd: f64 = 0.0;
    let mut l_inv: f64 = 0.0;
    for (i, (&t, &ft)) in grid.theta().iter().zip(f.values()).enumerate() {
        let fp = f.derivative(t);
        let s = ft.sin() / t.sin();
        let scale = (g0.w().eval(ft) - g1.w().samples()[i]).exp();
        l_fwd = l_fwd.max(fp.max(s) * scale);
        l_inv = l_inv.max((1.0 / fp).max(1.0 / s) / scale);
    }
    MapDiagnostics {
        j: f.jacobian(),
        k: f.dilatation(),
        l_fwd,
        l_inv,
    }
}

/// `sup |log J_F - 4 L eta - c|` and the volume-matching constant `c`
/// defined by `int e^{4 L eta + c} dv = vol(S^4)`.
pub fn jacobian_comparability(f: &AxisymMap, eta: &ZonalField) -> (f64, f64) {
    let l4 = potential_l(eta).scale(4.0);
    let c = -l4.map(f64::exp).mean().ln();
    let dev = f
        .jacobian()
        .samples()
        .iter()
        .zip(l4.samples())
        .fold(0.0f64, |m, (j, l)| m.max((j.ln() - l - c).abs()));
    (dev, c)
}

/// `M_0(1)` for `M_0' = eps C^{M_0}`, `M_0(0) = 0`.
pub fn dilatation_budget(c: f64, eps: f64) -> Result<f64> {
    if !(c > 1.0) || !(eps >= 0.0) {
        return Err(GeoError::Domain(format!("budget needs C > 1 and eps >= 0, got C = {c}, eps = {eps}")));
    }
    let lc = c.ln();
    if eps * lc >= 1.0 {
        return Err(GeoError::Budget { eps, max_eps: 1.0 / lc });
    }
    Ok(-(-eps * lc).ln_1p() / lc)
}

/// Discrete recursion `M(j + 1) = M(j) + (eps / k) C^{M(j)}` for `j < k`.
pub fn budget_recursion(c: f64, eps: f64, k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k + 1];
    for j in 0..k {
        m[j + 1] = m[j] + eps / k as f64 * c.powf(m[j]);
    }
    m
}

/// Quasisymmetry function `4^K e^{2 K (n - 1)} (1 + s)^K` with `n = 4`.
pub fn quasisymmetry_eta(k: f64, s: f64) -> f64 {
    4f64.powf(k) * (6.0 * k).exp() * (1.0 + s).powf(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::ball_volume;

    fn grid() -> Arc<ZonalGrid> {
        ZonalGrid::new(96, 40).unwrap()
    }

    #[test]
    fn identity_map_diagnostics() {
        let g = grid();
        let f = AxisymMap::identity(&g);
        let round = ConformalRoundMetric::round(&g);
        let d = map_diagnostics(&f, &round, &round);
        assert!((d.k - 1.0).abs() < 1e-14);
        assert!((d.l_fwd - 1.0).abs() < 1e-14 && (d.l_inv - 1.0).abs() < 1e-14);
        assert!(d.j.samples().iter().all(|j| (j - 1.0).abs() < 1e-14));
    }

    #[test]
    fn inverse_and_compose_roundtrip() {
        let g = grid();
        let f = AxisymMap::from_fn(&g, |t| t + 0.1 * t.sin()).unwrap();
        let fi = f.inverse().unwrap();
        let id = f.compose(&fi).unwrap();
        for (a, b) in id.values().iter().zip(g.theta()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_monotone_rejected() {
        let g = grid();
        let r = AxisymMap::from_fn(&g, |t| t + 1.5 * t.sin());
        assert!(matches!(r, Err(GeoError::NonMonotone(_))));
    }

    #[test]
    fn rho_between_ball_volumes() {
        let g = grid();
        let j = ZonalField::constant(&g, 1.0);
        let x = SpherePoint::on_meridian(0.8);
        for d in [0.05, 0.3, 1.0, 2.0] {
            let y = x.exp(&[-d * 0.8f64.sin(), d * 0.8f64.cos(), 0.0, 0.0, 0.0]);
            let r4 = rho_distance(&x, &y, &j).unwrap().powi(4);
            assert!(r4 >= ball_volume(0.25 * d) && r4 <= ball_volume(0.5 * d), "d = {d}");
        }
        let scaled = ZonalField::constant(&g, 16.0);
        let y = SpherePoint::on_meridian(1.3);
        let r1 = rho_distance(&x, &y, &j).unwrap();
        let r2 = rho_distance(&x, &y, &scaled).unwrap();
        assert!((r2 / r1 - 2.0).abs() < 1e-12);
        assert!(matches!(rho_distance(&x, &x, &j), Err(GeoError::ZeroDistance)));
    }

    #[test]
    fn rho_log_derivative_bounded() {
        let g = grid();
        let j = ZonalField::from_fn(&g, |t| 1.0 + 0.2 * t.cos());
        let y = SpherePoint::on_meridian(1.0);
        let mut worst: f64 = 0.0;
        for d in [0.02, 0.1, 0.4, 1.0] {
            let th = 1.0 + d;
            let h = 1e-4 * d;
            let r = |t: f64| rho_distance(&SpherePoint::on_meridian(t), &y, &j).unwrap().ln();
            let dl = (r(th + h) - r(th - h)) / (2.0 * h);
            worst = worst.max(dl.abs() * d);
        }
        assert!(worst < 2.0, "d |D log rho| = {worst}");
    }

    #[test]
    fn potential_field_support_and_direction() {
        let g = grid();
        let id = AxisymMap::identity(&g);
        let kernel = GreenKernel::new(32).unwrap();
        let x = SpherePoint::on_meridian(1.0);
        let far = SpherePoint::on_meridian(1.0 + 0.6 * CUTOFF_RADIUS);
        assert_eq!(potential_field_v(&x, &far, &id, &kernel).unwrap(), [0.0; 5]);
        let near = SpherePoint::on_meridian(0.9);
        let v = potential_field_v(&x, &near, &id, &kernel).unwrap();
        // points away from y along increasing theta
        let e_theta = [-(1.0f64).sin(), 1.0f64.cos(), 0.0, 0.0, 0.0];
        let c: f64 = v.iter().zip(&e_theta).map(|(a, b)| a * b).sum();
        assert!(c > 0.0);
    }

    #[test]
    fn flow_field_matches_direct_quadrature() {
        let g = grid();
        let eta = ZonalField::from_fn(&g, |t| 0.05 * (2.0 * t).cos() + 0.02 * t.cos());
        let phi = AxisymMap::from_fn(&g, |t| t + 0.05 * t.sin()).unwrap();
        let kernel = GreenKernel::new(32).unwrap();
        let v = flow_field_v(&eta, &phi, &kernel).unwrap();
        // direct: y = Phi(z) over z in polar coordinates around x, meridional component
        let tx = 1.2;
        let x = SpherePoint::on_meridian(tx);
        let e_theta = [-tx.sin(), tx.cos(), 0.0, 0.0, 0.0];
        let rule = orbit_rule(12);
        let (ts, tw) = gauss_legendre_on(40, 0.0, 0.5 * CUTOFF_RADIUS);
        let jphi = phi.jacobian();
        let mut direct = 0.0;
        for (&t, &wt) in ts.iter().zip(&tw) {
            for &(b, wb) in &rule {
                let u = [-tx.sin() * b.cos(), tx.cos() * b.cos(), b.sin(), 0.0, 0.0];
                let u = [-u[0], -u[1], u[2], 0.0, 0.0];
                let z = x.exp(&u.map(|c| c * t));
                let y = with_polar_angle(&z, phi.eval(z.polar_angle()));
                let vv = potential_field_v(&x, &y, &phi, &kernel).unwrap();
                let comp: f64 = vv.iter().zip(&e_theta).map(|(a, b)| a * b).sum();
                let zt = z.polar_angle();
                direct += wt * wb * t.sin().powi(3) * comp * eta.eval(phi.eval(zt)) * jphi.eval(zt);
            }
        }
        let got = v.a(tx);
        assert!((got - direct).abs() < 1e-4 * direct.abs().max(1e-3), "{got} vs {direct}");
    }

    #[test]
    fn zero_field_keeps_map() {
        let g = grid();
        let f = AxisymMap::from_fn(&g, |t| t + 0.05 * t.sin()).unwrap();
        let out = advance_step(&f, &MeridionalField::zeros(&g), 0.1).unwrap();
        assert_eq!(out.values(), f.values());
    }

    #[test]
    fn conformal_field_flow_has_unit_dilatation() {
        let g = grid();
        let v = MeridionalField::new(ZonalField::constant(&g, 0.3));
        let mut f = AxisymMap::identity(&g);
        for _ in 0..10 {
            f = advance_step(&f, &v, 0.02).unwrap();
        }
        assert!((f.dilatation() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_eta_gives_identity() {
        let g = grid();
        let run = run_qc_iteration(
            &ZonalField::zeros(&g),
            QcOptions {
                steps: 4,
                kernel_truncation: 32,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in run.map.values().iter().zip(g.theta()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(run.trace.iter().all(|r| (r.dilatation - 1.0).abs() < 1e-14));
    }

    #[test]
    fn budget_closed_form() {
        assert!((dilatation_budget(2.0, 1e-8).unwrap() / 1e-8 - 1.0).abs() < 1e-7);
        let m = budget_recursion(2.0, 0.1, 10);
        assert!(m[10] <= dilatation_budget(2.0, 0.1).unwrap());
        assert!(matches!(dilatation_budget(2.0, 2.0), Err(GeoError::Budget { .. })));
    }
}
