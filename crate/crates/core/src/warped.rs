//! Cohomogeneity-one metrics `ds^2 + f(s)^2 dtau^2 + h(s)^2 g_{S^2}` on `S^4`,
//! `s in [0, L]`.
//!
//! The 2-sphere collapses at `s = 0` and the circle at `s = L`. The round
//! metric is `L = pi/2`, `f = cos s`, `h = sin s`. Profiles are stored as
//! `f = sum a_k cos(c_k s)`, `h = sum b_k sin(c_k s)` with
//! `c_k = (2k+1) pi / (2L)`, which builds in the parity needed at both ends.
//!
//! In the orthonormal frame `(d_s, d_tau/f, S^2/h)` the curvature operator
//! is diagonal with sectional curvatures
//! `K01 = -f''/f`, `K0a = -h''/h`, `K1a = -f'h'/(fh)`, `K23 = (1-h'^2)/h^2`.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::curvature::CurvatureReport;
use crate::error::{GeoError, Result};
use crate::quadrature::gauss_legendre_on;

/// Volume of the `S^1 x S^2` orbit with unit radii.
pub const ORBIT_VOLUME: f64 = 8.0 * PI * PI;

const CLOSURE_TOL: f64 = 1e-6;

/// Value with first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const fn new(v: f64, d1: f64, d2: f64) -> Self {
        Self { v, d1, d2 }
    }

    pub const fn constant(v: f64) -> Self {
        Self { v, d1: 0.0, d2: 0.0 }
    }

    pub fn sq(self) -> Self {
        self * self
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2::new(-self.v, -self.d1, -self.d2)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        Jet2::new(self.v * c, self.d1 * c, self.d2 * c)
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        let v = self.v / o.v;
        let d1 = (self.d1 - v * o.d1) / o.v;
        let d2 = (self.d2 - 2.0 * d1 * o.d1 - v * o.d2) / o.v;
        Jet2::new(v, d1, d2)
    }
}

/// Derivatives `0..=4` of `f` and `h` at one point, plus `1 - h'` computed
/// without cancellation near `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub f: [f64; 5],
    pub h: [f64; 5],
    pub one_minus_hp: f64,
}

/// Frame components of the curvature decomposition at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedLocal {
    /// `Ric` diagonal `(00, 11, aa)`.
    pub ric: [f64; 3],
    pub r: f64,
    /// `E` diagonal `(00, 11, aa)`.
    pub e: [f64; 3],
    /// Weyl sectional parts `(w01, w0a, w1a, w23)`.
    pub w: [f64; 4],
    /// Bach diagonal `(00, 11, aa)`.
    pub b: [f64; 3],
    pub norm_e2: f64,
    pub norm_w2: f64,
    pub norm_b2: f64,
    pub q: f64,
    pub alpha: f64,
    pub eta: f64,
}

struct Sectional {
    k01: Jet2,
    k0a: Jet2,
    k1a: Jet2,
    k23: Jet2,
    alpha: Jet2,
    eta: Jet2,
}

fn sectional(p: &ProfileJet) -> Sectional {
    let f = |i: usize| Jet2::new(p.f[i], p.f[i + 1], p.f[i + 2]);
    let h = |i: usize| Jet2::new(p.h[i], p.h[i + 1], p.h[i + 2]);
    let (f0, f1, f2) = (f(0), f(1), f(2));
    let (h0, h1, h2) = (h(0), h(1), h(2));
    let alpha = f1 / f0;
    let eta = h1 / h0;
    // 1 - h'^2 = (1 - h')(1 + h')
    let omh = Jet2::new(p.one_minus_hp, -p.h[2], -p.h[3]);
    let num = omh * (Jet2::constant(2.0) - omh);
    Sectional {
        k01: -(f2 / f0),
        k0a: -(h2 / h0),
        k1a: -(alpha * eta),
        k23: num / h0.sq(),
        alpha,
        eta,
    }
}

/// Ricci diagonal `(00, 11, aa)` from derivatives `0..=2` of `f` and `h`.
pub fn ricci_frame(f: [f64; 3], h: [f64; 3], one_minus_hp: f64) -> [f64; 3] {
    let k01 = -f[2] / f[0];
    let k0a = -h[2] / h[0];
    let k1a = -f[1] * h[1] / (f[0] * h[0]);
    let k23 = one_minus_hp * (2.0 - one_minus_hp) / (h[0] * h[0]);
    [k01 + 2.0 * k0a, k01 + 2.0 * k1a, k0a + k1a + k23]
}

/// Full curvature decomposition at one point.
pub fn warped_local(p: &ProfileJet) -> WarpedLocal {
    let k = sectional(p);
    let r0 = k.k01 + k.k0a * 2.0;
    let r1 = k.k01 + k.k1a * 2.0;
    let r2 = k.k0a + k.k1a + k.k23;
    let r = r0 + r1 + r2 * 2.0;
    let e0 = r0 - r * 0.25;
    let e1 = r1 - r * 0.25;
    let e2 = r2 - r * 0.25;
    let r12 = r * (1.0 / 12.0);
    let w01 = k.k01 - (e0 + e1) * 0.5 - r12;
    let w0a = k.k0a - (e0 + e2) * 0.5 - r12;
    let w1a = k.k1a - (e1 + e2) * 0.5 - r12;
    let w23 = k.k23 - e2 - r12;

    let (a, n) = (k.alpha.v, k.eta.v);
    let lap_r = r.d2 + (a + 2.0 * n) * r.d1;
    let (ev, wv) = ([e0.v, e1.v, e2.v], [w01.v, w0a.v, w1a.v, w23.v]);
    let norm_e2 = ev[0] * ev[0] + ev[1] * ev[1] + 2.0 * ev[2] * ev[2];

    // div W = 1/2 dA with A = Ric - R g / 6; its two independent frame
    // components t1 = T_{101}, t2 = T_{a0a} (t1 + 2 t2 = 0)
    let sixth = r * (1.0 / 6.0);
    let (a0, a1, a2) = (r0 - sixth, r1 - sixth, r2 - sixth);
    let t1 = (Jet2::new(a1.d1, a1.d2, 0.0) - k.alpha * (a0 - a1)) * 0.5;
    let t2 = (Jet2::new(a2.d1, a2.d2, 0.0) - k.eta * (a0 - a2)) * 0.5;
    // B_ij = -nabla^k T_{jki} + 1/2 Ric^{kl} W_{kijl}; only t.v and t.d1 are exact
    let b = [
        -(a * t1.v + 2.0 * n * t2.v) - 0.5 * (ev[1] * wv[0] + 2.0 * ev[2] * wv[1]),
        -(t1.d1 + 2.0 * n * t1.v) - 0.5 * (ev[0] * wv[0] + 2.0 * ev[2] * wv[2]),
        -(t2.d1 + (a + n) * t2.v) - 0.5 * (ev[0] * wv[1] + ev[1] * wv[2] + ev[2] * wv[3]),
    ];
    WarpedLocal {
        ric: [r0.v, r1.v, r2.v],
        r: r.v,
        e: ev,
        w: wv,
        b,
        norm_e2,
        norm_w2: wv[0] * wv[0] + 2.0 * wv[1] * wv[1] + 2.0 * wv[2] * wv[2] + wv[3] * wv[3],
        norm_b2: b[0] * b[0] + b[1] * b[1] + 2.0 * b[2] * b[2],
        q: (-lap_r + 0.25 * r.v * r.v - 3.0 * norm_e2) / 12.0,
        alpha: a,
        eta: n,
    }
}

/// Axisymmetric doubly warped metric on `S^4`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedAxisymMetric {
    length: f64,
    f: Vec<f64>,
    h: Vec<f64>,
}

fn wave(k: usize, length: f64) -> f64 {
    (2 * k + 1) as f64 * PI / (2.0 * length)
}

/// `sum c_k cos(w_k s + phase)` derivatives `0..=4` where the `m`-th derivative
/// of `cos(w s + phase)` is `w^m cos(w s + phase + m pi/2)`.
fn trig_jet(coeffs: &[f64], length: f64, s: f64, phase: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let w = wave(k, length);
        let (sn, cs) = (w * s + phase).sin_cos();
        // cos, -sin, -cos, sin, cos
        let vals = [cs, -sn, -cs, sn, cs];
        let mut p = 1.0;
        for m in 0..5 {
            out[m] += c * p * vals[m];
            p *= w;
        }
    }
    out
}

impl WarpedAxisymMetric {
    pub fn new(length: f64, f: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(GeoError::Profile(format!("length must be positive, got {length}")));
        }
        if f.is_empty() || h.is_empty() {
            return Err(GeoError::Profile("empty profile".into()));
        }
        let m = Self { length, f, h };
        m.validate()?;
        Ok(m)
    }

    /// Unchecked constructor used inside iterations that re-validate later.
    pub(crate) fn raw(length: f64, f: Vec<f64>, h: Vec<f64>) -> Self {
        Self { length, f, h }
    }

    pub fn round() -> Self {
        Self {
            length: PI / 2.0,
            f: vec![1.0],
            h: vec![1.0],
        }
    }

    /// `f = cos s (1 + eps_f sin^2 2s)`, `h = sin s (1 + eps_h sin^2 2s)` on `[0, pi/2]`.
    pub fn squashed(eps_f: f64, eps_h: f64) -> Result<Self> {
        Self::new(
            PI / 2.0,
            vec![1.0 + 0.5 * eps_f, -0.25 * eps_f, -0.25 * eps_f],
            vec![1.0 + 0.5 * eps_h, 0.25 * eps_h, -0.25 * eps_h],
        )
    }

    /// Projects arbitrary profile functions onto `modes` basis functions.
    pub fn from_functions(
        length: f64,
        f: impl Fn(f64) -> f64,
        h: impl Fn(f64) -> f64,
        modes: usize,
    ) -> Result<Self> {
        let (fc, hc) = project_profiles(length, modes, 4 * modes + 64, |s| (f(s), h(s)));
        Self::new(length, fc, hc)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn f_coeffs(&self) -> &[f64] {
        &self.f
    }

    pub fn h_coeffs(&self) -> &[f64] {
        &self.h
    }

    pub fn modes(&self) -> usize {
        self.f.len().max(self.h.len())
    }

    pub fn f_jet(&self, s: f64) -> [f64; 5] {
        trig_jet(&self.f, self.length, s, 0.0)
    }

    pub fn h_jet(&self, s: f64) -> [f64; 5] {
        trig_jet(&self.h, self.length, s, -PI / 2.0)
    }

    /// `1 - h'(s)` evaluated as `sum b_k w_k 2 sin^2(w_k s / 2)`.
    ///
    /// This imposes `h'(0) = 1` exactly; the true defect is bounded at
    /// construction. Without it, round-off in `h'(0)` would be divided by
    /// `h^2` and its derivatives near the collapsing 2-sphere.
    pub fn one_minus_hp(&self, s: f64) -> f64 {
        self.h
            .iter()
            .enumerate()
            .map(|(k, &b)| {
                let w = wave(k, self.length);
                b * w * 2.0 * (0.5 * w * s).sin().powi(2)
            })
            .sum()
    }

    pub fn jet(&self, s: f64) -> ProfileJet {
        ProfileJet {
            f: self.f_jet(s),
            h: self.h_jet(s),
            one_minus_hp: self.one_minus_hp(s),
        }
    }

    pub fn local(&self, s: f64) -> WarpedLocal {
        warped_local(&self.jet(s))
    }

    fn validate(&self) -> Result<()> {
        let hp0 = self.h_jet(0.0)[1];
        let fpl = self.f_jet(self.length)[1];
        if (hp0 - 1.0).abs() > CLOSURE_TOL {
            return Err(GeoError::Profile(format!("h'(0) = {hp0}, expected 1")));
        }
        if (fpl + 1.0).abs() > CLOSURE_TOL {
            return Err(GeoError::Profile(format!("f'(L) = {fpl}, expected -1")));
        }
        let n = 1000;
        for i in 1..n {
            let s = self.length * i as f64 / n as f64;
            let (f, h) = (self.f_jet(s)[0], self.h_jet(s)[0]);
            if !(f > 0.0 && h > 0.0) {
                return Err(GeoError::Profile(format!(
                    "profile not positive at s = {s}: f = {f}, h = {h}"
                )));
            }
        }
        Ok(())
    }

    /// Gauss–Legendre nodes in `s` and the weights of `dv = 8 pi^2 f h^2 ds`.
    pub fn quadrature(&self, nodes: usize) -> (Vec<f64>, Vec<f64>) {
        let (s, w) = gauss_legendre_on(nodes, 0.0, self.length);
        let dv = s
            .iter()
            .zip(&w)
            .map(|(&s, &w)| {
                let (f, h) = (self.f_jet(s)[0], self.h_jet(s)[0]);
                ORBIT_VOLUME * f * h * h * w
            })
            .collect();
        (s, dv)
    }

    pub fn volume(&self) -> f64 {
        self.quadrature(4 * self.modes() + 32).1.iter().sum()
    }

    /// Metric `e^{2u} g` in arclength form, with `u = sum u_k cos(k pi s / L)`,
    /// projected onto `modes` basis functions.
    pub fn conformal_change(&self, u: &[f64], modes: usize) -> Result<Self> {
        let (fc, hc, new_len) = self.remap(modes, |s| cosine_series(u, self.length, s)[0]);
        Self::new(new_len, fc, hc)
    }

    /// Multiplies the profiles by `e^u` and reparametrises by the new
    /// arclength `int e^u ds`. Returns new coefficients and length.
    fn remap(&self, modes: usize, u_of_s: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>, f64) {
        let length = self.length;
        let e = |s: f64| u_of_s(s).exp();
        let map = ArclengthMap::build(length, &e, 4 * modes + 64);
        let new_len = map.total();
        let (fc, hc) = project_profiles(new_len, modes, 4 * modes + 64, |sigma| {
            let s = map.invert(sigma);
            let g = e(s);
            (g * self.f_jet(s)[0], g * self.h_jet(s)[0])
        });
        (fc, hc, new_len)
    }
}

/// `sum c_k cos(k pi s / L)` and derivatives `0..=2`.
pub fn cosine_series(c: &[f64], length: f64, s: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, &ck) in c.iter().enumerate() {
        let w = k as f64 * PI / length;
        let (sn, cs) = (w * s).sin_cos();
        out[0] += ck * cs;
        out[1] -= ck * w * sn;
        out[2] -= ck * w * w * cs;
    }
    out
}

/// Least-squares projection onto the odd cosine / sine bases on `[0, length]`.
pub(crate) fn project_profiles(
    length: f64,
    modes: usize,
    nodes: usize,
    sample: impl Fn(f64) -> (f64, f64),
) -> (Vec<f64>, Vec<f64>) {
    let (s, w) = gauss_legendre_on(nodes, 0.0, length);
    let mut fc = vec![0.0; modes];
    let mut hc = vec![0.0; modes];
    for (&si, &wi) in s.iter().zip(&w) {
        let (fv, hv) = sample(si);
        for k in 0..modes {
            let (sn, cs) = (wave(k, length) * si).sin_cos();
            fc[k] += 2.0 / length * wi * fv * cs;
            hc[k] += 2.0 / length * wi * hv * sn;
        }
    }
    (fc, hc)
}

/// Monotone map `s -> sigma = int_0^s rate` with Newton inversion.
pub(crate) struct ArclengthMap<'a, F: Fn(f64) -> f64> {
    rate: &'a F,
    length: f64,
    nodes: Vec<f64>,
    // cumulative integral at the panel endpoints
    cumulative: Vec<f64>,
    total: f64,
    rule: (Vec<f64>, Vec<f64>),
}

impl<'a, F: Fn(f64) -> f64> ArclengthMap<'a, F> {
    pub(crate) fn build(length: f64, rate: &'a F, panels: usize) -> Self {
        let rule = gauss_legendre_on(12, 0.0, 1.0);
        let nodes: Vec<f64> = (0..=panels).map(|i| length * i as f64 / panels as f64).collect();
        let mut cumulative = vec![0.0; panels + 1];
        for i in 0..panels {
            cumulative[i + 1] = cumulative[i] + panel(rate, &rule, nodes[i], nodes[i + 1]);
        }
        let total = cumulative[panels];
        Self {
            rate,
            length,
            nodes,
            cumulative,
            total,
            rule,
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.total
    }

    pub(crate) fn eval(&self, s: f64) -> f64 {
        let panels = self.nodes.len() - 1;
        let i = ((s / self.length * panels as f64).floor() as usize).min(panels - 1);
        self.cumulative[i] + panel(self.rate, &self.rule, self.nodes[i], s)
    }

    pub(crate) fn invert(&self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return 0.0;
        }
        if sigma >= self.total {
            return self.length;
        }
        let mut s = self.length * sigma / self.total;
        for _ in 0..50 {
            let step = (self.eval(s) - sigma) / (self.rate)(s);
            s = (s - step).clamp(0.0, self.length);
            if step.abs() < 1e-15 * self.length {
                break;
            }
        }
        s
    }
}

fn panel(rate: &impl Fn(f64) -> f64, rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64) -> f64 {
    let h = b - a;
    rule.0.iter().zip(&rule.1).map(|(t, w)| w * h * rate(a + h * t)).sum()
}

/// Curvature report at `nodes` Gauss–Legendre points in arclength.
pub fn warped_curvature(m: &WarpedAxisymMetric, nodes: usize) -> CurvatureReport {
    let (s, dv) = m.quadrature(nodes);
    let n = s.len();
    let mut cols: [Vec<f64>; 5] = Default::default();
    for c in cols.iter_mut() {
        c.reserve(n);
    }
    for &si in &s {
        let p = m.local(si);
        cols[0].push(p.r);
        cols[1].push(p.norm_e2);
        cols[2].push(p.norm_w2);
        cols[3].push(p.norm_b2);
        cols[4].push(p.q);
    }
    let [r, e2, w2, b2, q] = cols;
    CurvatureReport::new(s, dv, r, e2, w2, b2, q)
}

/// Sup over interior nodes of `|delta W - 1/2 dA|` with `A = Ric - R g / 6`,
/// using second-order central differences on a uniform cell-centred grid
/// of `n` cells.
pub fn bianchi_delta_w_check(m: &WarpedAxisymMetric, n: usize) -> f64 {
    let len = m.length();
    let dx = len / n as f64;
    let pts: Vec<WarpedLocal> = (0..n).map(|i| m.local((i as f64 + 0.5) * dx)).collect();
    let a = |p: &WarpedLocal, i: usize| p.ric[i] - p.r / 6.0;
    let mut sup: f64 = 0.0;
    for i in 1..n - 1 {
        let (l, c, r) = (&pts[i - 1], &pts[i], &pts[i + 1]);
        let d = |g: &dyn Fn(&WarpedLocal) -> f64| (g(r) - g(l)) / (2.0 * dx);
        let [w01, w0a, w1a, w23] = c.w;
        let dw01 = d(&|p| p.w[0]);
        let dw0a = d(&|p| p.w[1]);
        // (div W)_{bcd} = nabla^a W_{abcd} at (1,0,1) and (a,0,a)
        let div_w_101 = dw01 + 2.0 * c.eta * (w01 - w1a);
        let div_w_a0a = dw0a + c.alpha * (w0a - w1a) + c.eta * (w0a - w23);
        let (a0, a1, a2) = (a(c, 0), a(c, 1), a(c, 2));
        // (dA)_{bcd} = nabla_c A_{db} - nabla_d A_{cb}
        let da_101 = d(&|p| a(p, 1)) - c.alpha * (a0 - a1);
        let da_a0a = d(&|p| a(p, 2)) - c.eta * (a0 - a2);
        sup = sup
            .max((div_w_101 - 0.5 * da_101).abs())
            .max((div_w_a0a - 0.5 * da_a0a).abs());
    }
    sup
}
