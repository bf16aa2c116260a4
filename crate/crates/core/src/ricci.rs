//! Normalised Ricci flow `dg/dt = -2 Ric + (Rbar / 2) g` on doubly warped
//! metrics, Yamabe normalisation inside a conformal class, and the
//! curvature inequalities checked along the way.
//!
//! During a step the metric is `L^2 A(xi)^2 dxi^2 + f^2 dtau^2 + h^2 g_{S^2}`
//! on the fixed interval `xi in [0, 1]`. After every step it is brought back
//! to arclength form (`A = 1`) by reparametrisation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::curvature::{CurvatureReport, GAUSS_BONNET_S4};
use crate::error::{GeoError, Result};
use crate::quadrature::gauss_legendre_on;
use crate::sphere::VOLUME_S4;
use crate::warped::{
    cosine_series, ricci_frame, warped_curvature, warped_local, ProfileJet, WarpedAxisymMetric,
    ORBIT_VOLUME,
};

/// Admissibility gate on `int |W|^2` for decay experiments.
pub const DECAY_BETA_GATE: f64 = 1e-3 * PI * PI;

// ---------------------------------------------------------------------------
// Yamabe normalisation

#[derive(Debug, Clone, Copy)]
pub struct YamabeOptions {
    /// Cosine modes of the conformal factor.
    pub modes: usize,
    /// Profile modes of the output metric.
    pub output_modes: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for YamabeOptions {
    fn default() -> Self {
        Self {
            modes: 24,
            output_modes: 40,
            max_iter: 40,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct YamabeResult {
    pub metric: WarpedAxisymMetric,
    /// `u = sum u_k cos(k pi s / L)` on the input metric's arclength.
    pub u: Vec<f64>,
    /// The constant scalar curvature reached.
    pub r: f64,
    pub iterations: usize,
}

/// Finds `u` with `R(e^{2u} g)` constant and volume `8 pi^2 / 3`, then
/// returns `e^{2u} g` in arclength form.
pub fn yamabe_normalize(m: &WarpedAxisymMetric) -> Result<YamabeResult> {
    yamabe_normalize_with(m, YamabeOptions::default())
}

pub fn yamabe_normalize_with(m: &WarpedAxisymMetric, opt: YamabeOptions) -> Result<YamabeResult> {
    let len = m.length();
    let nm = opt.modes;
    let (s, w) = gauss_legendre_on(4 * nm + 64, 0.0, len);
    let local: Vec<_> = s.iter().map(|&si| m.local(si)).collect();
    let dv: Vec<f64> = s
        .iter()
        .zip(&w)
        .map(|(&si, &wi)| {
            let (f, h) = (m.f_jet(si)[0], m.h_jet(si)[0]);
            ORBIT_VOLUME * f * h * h * wi
        })
        .collect();
    let basis = |k: usize, si: f64| {
        let c = k as f64 * PI / len;
        let (sn, cs) = (c * si).sin_cos();
        [cs, -c * sn, -c * c * cs]
    };
    let vol0: f64 = dv.iter().sum();
    let r_mean: f64 = local.iter().zip(&dv).map(|(p, v)| p.r * v).sum::<f64>() / vol0;
    let mut u = vec![0.0; nm];
    u[0] = 0.25 * (VOLUME_S4 / vol0).ln();
    let mut lambda = r_mean * (-2.0 * u[0]).exp();
    let mut last = f64::INFINITY;
    for iter in 0..opt.max_iter {
        let mut res = DVector::<f64>::zeros(nm + 1);
        let mut jac = DMatrix::<f64>::zeros(nm + 1, nm + 1);
        let mut vol = 0.0;
        for (i, &si) in s.iter().enumerate() {
            let p = &local[i];
            let [u0, u1, u2] = cosine_series(&u, len, si);
            let drift = p.alpha + 2.0 * p.eta;
            let e = (-2.0 * u0).exp();
            let rt = e * (p.r - 6.0 * (u2 + drift * u1) - 6.0 * u1 * u1);
            let phis: Vec<[f64; 3]> = (0..nm).map(|j| basis(j, si)).collect();
            let wi = w[i] * 2.0 / len;
            let e4 = (4.0 * u0).exp() * dv[i];
            vol += e4;
            for k in 0..nm {
                res[k] += wi * (rt - lambda) * phis[k][0];
                for j in 0..nm {
                    let d = phis[j];
                    let dr = -2.0 * d[0] * rt + e * (-6.0 * (d[2] + drift * d[1]) - 12.0 * u1 * d[1]);
                    jac[(k, j)] += wi * dr * phis[k][0];
                }
                jac[(k, nm)] -= wi * phis[k][0];
            }
            for j in 0..nm {
                jac[(nm, j)] += 4.0 * e4 * phis[j][0];
            }
        }
        res[nm] = (vol - VOLUME_S4) / VOLUME_S4;
        for j in 0..nm {
            jac[(nm, j)] /= VOLUME_S4;
        }
        let norm = res.norm();
        last = norm;
        if norm < opt.tol {
            let metric = m.conformal_change(&u, opt.output_modes)?;
            return Ok(YamabeResult {
                metric,
                u,
                r: lambda,
                iterations: iter,
            });
        }
        let step = jac.lu().solve(&res).ok_or(GeoError::Newton {
            iterations: iter,
            residual: norm,
        })?;
        for j in 0..nm {
            u[j] -= step[j];
        }
        lambda -= step[nm];
        if !norm.is_finite() {
            break;
        }
    }
    Err(GeoError::Newton {
        iterations: opt.max_iter,
        residual: last,
    })
}

// ---------------------------------------------------------------------------
// Inequalities

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BachCheck {
    /// `int |E|^4`
    pub e4: f64,
    /// `int |W|^4`
    pub w4: f64,
    /// `M = int (|W|^2 + |E|^2)`
    pub m: f64,
    pub gamma: f64,
    pub m_gamma: f64,
    pub ratio_e: f64,
    pub ratio_w: f64,
    pub y_lower: f64,
    /// Set when `M` is outside the small-curvature regime.
    pub flagged: bool,
}

/// Both sides of `int |E|^4 <= C M int |B|^2` and `int |W|^4 <= C M int |B|^2`.
pub fn bach_inequality_check(rep: &CurvatureReport, y_lower: f64) -> BachCheck {
    let e4 = rep.e4();
    let w4 = rep.w4();
    let m = rep.integrals.beta + rep.integrals.e2;
    let gamma = rep.integrals.gamma;
    let mg = m * gamma;
    let ratio = |x: f64| if mg > 0.0 { x / mg } else if x == 0.0 { 0.0 } else { f64::INFINITY };
    BachCheck {
        e4,
        w4,
        m,
        gamma,
        m_gamma: mg,
        ratio_e: ratio(e4),
        ratio_w: ratio(w4),
        y_lower,
        flagged: m >= 0.1,
    }
}

// ---------------------------------------------------------------------------
// Flow state

/// Profile and gauge coefficients on `xi in [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
struct Coeffs {
    length: f64,
    a: Vec<f64>,
    f: Vec<f64>,
    h: Vec<f64>,
}

impl Coeffs {
    fn axpy(&self, dt: f64, v: &Velocity) -> Coeffs {
        let add = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a + dt * b).collect();
        Coeffs {
            length: self.length,
            a: add(&self.a, &v.a),
            f: add(&self.f, &v.f),
            h: add(&self.h, &v.h),
        }
    }
}

/// Time derivative of the coefficients of `A`, `f` and `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub a: Vec<f64>,
    pub f: Vec<f64>,
    pub h: Vec<f64>,
}

/// Basis tables at the fixed Gauss–Legendre nodes in `xi`.
#[derive(Debug, Clone)]
struct FlowGrid {
    modes: usize,
    xi: Vec<f64>,
    w: Vec<f64>,
    // [derivative][node][mode]
    a_tab: [Vec<Vec<f64>>; 2],
    f_tab: [Vec<Vec<f64>>; 3],
    h_tab: [Vec<Vec<f64>>; 3],
    // 2 sin^2(c xi / 2) for the A and h frequencies
    a_half: Vec<Vec<f64>>,
    h_half: Vec<Vec<f64>>,
}

fn odd_freq(k: usize) -> f64 {
    (2 * k + 1) as f64 * PI / 2.0
}

impl FlowGrid {
    fn new(modes: usize, nodes: usize) -> Self {
        let (xi, w) = gauss_legendre_on(nodes, 0.0, 1.0);
        let table = |g: &dyn Fn(usize, f64) -> f64| -> Vec<Vec<f64>> {
            xi.iter().map(|&x| (0..modes).map(|k| g(k, x)).collect()).collect()
        };
        let ka = |k: usize| k as f64 * PI;
        Self {
            modes,
            a_tab: [
                table(&|k, x| (ka(k) * x).cos()),
                table(&|k, x| -ka(k) * (ka(k) * x).sin()),
            ],
            f_tab: [
                table(&|k, x| (odd_freq(k) * x).cos()),
                table(&|k, x| -odd_freq(k) * (odd_freq(k) * x).sin()),
                table(&|k, x| -odd_freq(k).powi(2) * (odd_freq(k) * x).cos()),
            ],
            h_tab: [
                table(&|k, x| (odd_freq(k) * x).sin()),
                table(&|k, x| odd_freq(k) * (odd_freq(k) * x).cos()),
                table(&|k, x| -odd_freq(k).powi(2) * (odd_freq(k) * x).sin()),
            ],
            a_half: table(&|k, x| 2.0 * (0.5 * ka(k) * x).sin().powi(2)),
            h_half: table(&|k, x| 2.0 * (0.5 * odd_freq(k) * x).sin().powi(2)),
            xi,
            w,
        }
    }

    fn dot(row: &[f64], c: &[f64]) -> f64 {
        row.iter().zip(c).map(|(a, b)| a * b).sum()
    }
}

/// Pointwise fields of the gauged metric at the flow nodes.
struct NodeFields {
    ric: Vec<[f64; 3]>,
    r: Vec<f64>,
    dv: Vec<f64>,
    a: Vec<f64>,
    f: Vec<f64>,
    h: Vec<f64>,
}

fn node_fields(grid: &FlowGrid, c: &Coeffs) -> NodeFields {
    let n = grid.xi.len();
    let len = c.length;
    let mut out = NodeFields {
        ric: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        dv: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
    };
    let hb: Vec<f64> = c.h.iter().enumerate().map(|(k, b)| b * odd_freq(k)).collect();
    for j in 0..n {
        let av = FlowGrid::dot(&grid.a_tab[0][j], &c.a);
        let ax = FlowGrid::dot(&grid.a_tab[1][j], &c.a);
        let fx: [f64; 3] = std::array::from_fn(|m| FlowGrid::dot(&grid.f_tab[m][j], &c.f));
        let hx: [f64; 3] = std::array::from_fn(|m| FlowGrid::dot(&grid.h_tab[m][j], &c.h));
        let la = len * av;
        let to_s = |d: [f64; 3]| [d[0], d[1] / la, (d[2] - d[1] * ax / av) / (la * la)];
        // (L A - h_xi) with the closure h_xi(0) = L A(0) imposed
        let gap = -len * FlowGrid::dot(&grid.a_half[j], &c.a) + FlowGrid::dot(&grid.h_half[j], &hb);
        let ric = ricci_frame(to_s(fx), to_s(hx), gap / la);
        out.r.push(ric[0] + ric[1] + 2.0 * ric[2]);
        out.ric.push(ric);
        out.dv.push(ORBIT_VOLUME * fx[0] * hx[0] * hx[0] * la * grid.w[j]);
        out.a.push(av);
        out.f.push(fx[0]);
        out.h.push(hx[0]);
    }
    out
}

fn velocity(grid: &FlowGrid, c: &Coeffs) -> (Velocity, f64) {
    let nf = node_fields(grid, c);
    let vol: f64 = nf.dv.iter().sum();
    let rbar = nf.r.iter().zip(&nf.dv).map(|(r, v)| r * v).sum::<f64>() / vol;
    let k = grid.modes;
    let mut v = Velocity {
        a: vec![0.0; k],
        f: vec![0.0; k],
        h: vec![0.0; k],
    };
    let mut max_rm: f64 = 0.0;
    for j in 0..grid.xi.len() {
        let ric = nf.ric[j];
        max_rm = max_rm.max(ric.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let va = nf.a[j] * (-ric[0] + 0.25 * rbar);
        let vf = nf.f[j] * (-ric[1] + 0.25 * rbar);
        let vh = nf.h[j] * (-ric[2] + 0.25 * rbar);
        let w = grid.w[j];
        for m in 0..k {
            let wa = if m == 0 { w } else { 2.0 * w };
            v.a[m] += wa * va * grid.a_tab[0][j][m];
            v.f[m] += 2.0 * w * vf * grid.f_tab[0][j][m];
            v.h[m] += 2.0 * w * vh * grid.h_tab[0][j][m];
        }
    }
    (v, max_rm)
}

/// Brings `A` back to 1 by reparametrising with the arclength of `L A dxi`.
fn regauge(grid: &FlowGrid, c: &Coeffs) -> Coeffs {
    let k = grid.modes;
    // sigma(xi) / L = a_0 xi + sum_{k>0} a_k sin(k pi xi) / (k pi), exact for the cosine series
    let sigma = |x: f64| -> (f64, f64) {
        let mut s = c.a[0] * x;
        let mut ds = c.a[0];
        for m in 1..k {
            let w = m as f64 * PI;
            let (sn, cs) = (w * x).sin_cos();
            s += c.a[m] * sn / w;
            ds += c.a[m] * cs;
        }
        (s, ds)
    };
    let total = c.a[0];
    let mut f = vec![0.0; k];
    let mut h = vec![0.0; k];
    for (j, &target) in grid.xi.iter().enumerate() {
        let goal = target * total;
        let mut x = target;
        for _ in 0..30 {
            let (s, ds) = sigma(x);
            let dx = (s - goal) / ds;
            x = (x - dx).clamp(0.0, 1.0);
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut fv = 0.0;
        let mut hv = 0.0;
        for m in 0..k {
            let (sn, cs) = (odd_freq(m) * x).sin_cos();
            fv += c.f[m] * cs;
            hv += c.h[m] * sn;
        }
        let w = grid.w[j];
        for m in 0..k {
            f[m] += 2.0 * w * fv * grid.f_tab[0][j][m];
            h[m] += 2.0 * w * hv * grid.h_tab[0][j][m];
        }
    }
    let length = c.length * total;
    close_poles(length, &mut f, &mut h);
    let mut a = vec![0.0; k];
    a[0] = 1.0;
    Coeffs { length, a, f, h }
}

/// Smallest coefficient change giving `h_xi(0) = L` and `f_xi(1) = -L`.
fn close_poles(length: f64, f: &mut [f64], h: &mut [f64]) {
    let c: Vec<f64> = (0..f.len()).map(odd_freq).collect();
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let norm: f64 = c.iter().map(|x| x * x).sum();
    let hd = length - h.iter().zip(&c).map(|(b, w)| b * w).sum::<f64>();
    let fd = length - f.iter().enumerate().map(|(k, a)| sign(k) * a * c[k]).sum::<f64>();
    for k in 0..c.len() {
        h[k] += hd * c[k] / norm;
        f[k] += fd * sign(k) * c[k] / norm;
    }
}

#[derive(Debug, Clone)]
pub struct RicciState {
    pub metric: WarpedAxisymMetric,
    pub t: f64,
    pub report: CurvatureReport,
    pub rbar: f64,
}

impl RicciState {
    pub fn new(metric: WarpedAxisymMetric, report_nodes: usize) -> Self {
        let report = warped_curvature(&metric, report_nodes);
        let rbar = report.mean_r();
        Self {
            metric,
            t: 0.0,
            report,
            rbar,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Profile modes carried by the flow.
    pub modes: usize,
    /// Gauss–Legendre nodes for the flow right-hand side.
    pub nodes: usize,
    /// Nodes used for curvature reports at sample times.
    pub report_nodes: usize,
    /// Safety factor `c` in `dt <= c (L / modes)^2 / max(1, |Rm|)`.
    pub cfl: f64,
    /// Record a diagnostics sample every this much time.
    pub sample_dt: f64,
    /// Abort when `max |Rm|` exceeds this.
    pub blowup: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            modes: 16,
            nodes: 256,
            report_nodes: 512,
            cfl: 0.1,
            sample_dt: 0.05,
            blowup: 1e4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSample {
    pub t: f64,
    pub w2: f64,
    pub e2: f64,
    pub b2: f64,
    pub r_dev: f64,
    pub gauss_bonnet: f64,
    pub drift: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    pub samples: Vec<FlowSample>,
    /// Largest one-step increase of `||W||_2` and `||E||_2`.
    pub max_step_increase_w: f64,
    pub max_step_increase_e: f64,
    pub steps: usize,
    /// Bilipschitz constant between the initial and the final metric in the
    /// shared `xi` coordinate.
    pub final_bilip: f64,
}

impl FlowDiagnostics {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,W2,E2,B2,Rdev,GB,drift\n");
        for p in &self.samples {
            let _ = writeln!(
                s,
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                p.t, p.w2, p.e2, p.b2, p.r_dev, p.gauss_bonnet, p.drift
            );
        }
        s
    }

    pub fn max_drift(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, p| m.max(p.drift))
    }

    pub fn max_gauss_bonnet_error(&self) -> f64 {
        self.samples
            .iter()
            .fold(0.0, |m, p| m.max((p.gauss_bonnet - GAUSS_BONNET_S4).abs() / GAUSS_BONNET_S4))
    }
}

fn to_coeffs(m: &WarpedAxisymMetric, modes: usize) -> Coeffs {
    let pad = |c: &[f64]| {
        let mut v = c.to_vec();
        v.resize(modes, 0.0);
        v
    };
    let mut a = vec![0.0; modes];
    a[0] = 1.0;
    Coeffs {
        length: m.length(),
        a,
        f: pad(m.f_coeffs()),
        h: pad(m.h_coeffs()),
    }
}

/// Metric components `(g_ss, g_tautau, g_aa)` at fixed `xi` nodes, in arclength gauge.
fn components(grid: &FlowGrid, c: &Coeffs) -> Vec<[f64; 3]> {
    (0..grid.xi.len())
        .map(|j| {
            let f = FlowGrid::dot(&grid.f_tab[0][j], &c.f);
            let h = FlowGrid::dot(&grid.h_tab[0][j], &c.h);
            [c.length * c.length, f * f, h * h]
        })
        .collect()
}

fn drift_between(g0: &[[f64; 3]], g: &[[f64; 3]]) -> f64 {
    g0.iter()
        .zip(g)
        .map(|(a, b)| {
            (0..3)
                .map(|i| (b[i] / a[i] - 1.0).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn bilip_between(g0: &[[f64; 3]], g: &[[f64; 3]]) -> f64 {
    g0.iter()
        .zip(g)
        .flat_map(|(a, b)| (0..3).map(move |i| (b[i] / a[i]).sqrt()))
        .fold(1.0f64, |m, r| m.max(r).max(1.0 / r))
}

/// Velocity of the coefficients at the current state (arclength gauge, `A = 1`).
pub fn ricci_rhs(state: &RicciState, modes: usize, nodes: usize) -> Velocity {
    let grid = FlowGrid::new(modes, nodes);
    velocity(&grid, &to_coeffs(&state.metric, modes)).0
}

fn sample(c: &Coeffs, t: f64, drift: f64, nodes: usize) -> (FlowSample, CurvatureReport, WarpedAxisymMetric) {
    let metric = WarpedAxisymMetric::raw(c.length, c.f.clone(), c.h.clone());
    let rep = warped_curvature(&metric, nodes);
    let s = FlowSample {
        t,
        w2: rep.integrals.beta.sqrt(),
        e2: rep.integrals.e2.sqrt(),
        b2: rep.integrals.gamma.sqrt(),
        r_dev: rep.r_deviation(),
        gauss_bonnet: rep.integrals.gauss_bonnet,
        drift,
        volume: rep.integrals.volume,
    };
    (s, rep, metric)
}

/// Evolves for time `t_end`. The step is the smaller of `t_end / min_steps`
/// and the stability bound.
pub fn ricci_evolve(
    state: &RicciState,
    t_end: f64,
    min_steps: usize,
    opt: FlowOptions,
) -> Result<(RicciState, FlowDiagnostics)> {
    let grid = FlowGrid::new(opt.modes, opt.nodes);
    let mut c = to_coeffs(&state.metric, opt.modes);
    let g0 = components(&grid, &c);
    let mut diag = FlowDiagnostics::default();
    let mut t = state.t;
    let t_stop = state.t + t_end;
    let (s0, _, _) = sample(&c, t, 0.0, opt.report_nodes);
    diag.samples.push(s0);
    let mut next_sample = t + opt.sample_dt;
    let mut last_we = monitor_norms(&grid, &c);
    let max_dt = t_end / min_steps.max(1) as f64;
    while t < t_stop - 1e-12 {
        let (v1, max_rm) = velocity(&grid, &c);
        if !(max_rm < opt.blowup) {
            return Err(GeoError::Blowup { t, max_rm });
        }
        let hs = c.length / opt.modes as f64;
        let dt = (opt.cfl * hs * hs / max_rm.max(1.0)).min(max_dt).min(t_stop - t);
        let c1 = c.axpy(dt, &v1);
        let (v2, _) = velocity(&grid, &c1);
        let avg = Velocity {
            a: v1.a.iter().zip(&v2.a).map(|(x, y)| 0.5 * (x + y)).collect(),
            f: v1.f.iter().zip(&v2.f).map(|(x, y)| 0.5 * (x + y)).collect(),
            h: v1.h.iter().zip(&v2.h).map(|(x, y)| 0.5 * (x + y)).collect(),
        };
        c = regauge(&grid, &c.axpy(dt, &avg));
        t += dt;
        diag.steps += 1;
        let we = monitor_norms(&grid, &c);
        diag.max_step_increase_w = diag.max_step_increase_w.max(we.0 - last_we.0);
        diag.max_step_increase_e = diag.max_step_increase_e.max(we.1 - last_we.1);
        last_we = we;
        if t >= next_sample - 1e-12 || t >= t_stop - 1e-12 {
            let drift = drift_between(&g0, &components(&grid, &c));
            let (s, _, _) = sample(&c, t, drift, opt.report_nodes);
            if !s.gauss_bonnet.is_finite() {
                return Err(GeoError::Blowup { t, max_rm });
            }
            diag.samples.push(s);
            next_sample += opt.sample_dt;
        }
    }
    diag.final_bilip = bilip_between(&g0, &components(&grid, &c));
    let (_, report, metric) = sample(&c, t, 0.0, opt.report_nodes);
    let rbar = report.mean_r();
    Ok((
        RicciState {
            metric,
            t,
            report,
            rbar,
        },
        diag,
    ))
}

/// `(||W||_2, ||E||_2)` at the flow nodes, for per-step monotonicity checks.
fn monitor_norms(grid: &FlowGrid, c: &Coeffs) -> (f64, f64) {
    let metric = WarpedAxisymMetric::raw(c.length, c.f.clone(), c.h.clone());
    let mut w2 = 0.0;
    let mut e2 = 0.0;
    for (j, &x) in grid.xi.iter().enumerate() {
        let s = x * c.length;
        let p = warped_local(&ProfileJet {
            f: metric.f_jet(s),
            h: metric.h_jet(s),
            one_minus_hp: metric.one_minus_hp(s),
        });
        let dv = ORBIT_VOLUME * metric.f_jet(s)[0] * metric.h_jet(s)[0].powi(2) * c.length * grid.w[j];
        w2 += p.norm_w2 * dv;
        e2 += p.norm_e2 * dv;
    }
    (w2.sqrt(), e2.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftReport {
    pub drift: f64,
    pub gamma_beta: f64,
    /// `drift / (gamma beta)`; infinite when the product vanishes and the drift does not.
    pub ratio: f64,
    pub bilip: f64,
    /// Bilipschitz constant implied by the drift alone, `1 / sqrt(1 - drift)`.
    pub drift_bound: f64,
}

pub fn drift_and_bilip(diag: &FlowDiagnostics, beta: f64, gamma: f64) -> DriftReport {
    let drift = diag.max_drift();
    let gb = gamma * beta;
    let ratio = if gb > 0.0 {
        drift / gb
    } else if drift == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let drift_bound = if drift < 1.0 { 1.0 / (1.0 - drift).sqrt() } else { f64::INFINITY };
    DriftReport {
        drift,
        gamma_beta: gb,
        ratio,
        bilip: diag.final_bilip.max(1.0),
        drift_bound,
    }
}
