//! Geometry of the round unit 4-sphere: points, geodesics, zonal quadrature
//! and the orthonormal zonal-harmonic transform.
//!
//! Zonal functions depend on the polar angle `theta` only. They are sampled
//! on Gauss–Legendre nodes in `x = cos(theta)`, which never hit the poles.
//! The degree-`k` zonal harmonic is the normalised Gegenbauer polynomial
//! `C_k^{3/2}(x)` and satisfies `Delta Z_k = -k(k+3) Z_k` with `Delta <= 0`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{GeoError, Result};
use crate::quadrature::{gauss_legendre, gegenbauer};

/// Volume of the round unit 4-sphere, `8 pi^2 / 3`.
pub const VOLUME_S4: f64 = 8.0 * PI * PI / 3.0;

/// Volume of the unit 3-sphere.
pub const VOLUME_S3: f64 = 2.0 * PI * PI;

pub const DEFAULT_NODES: usize = 256;
pub const DEFAULT_KMAX: usize = 64;

/// Eigenvalue `k(k+3)` of `-Delta` on degree-`k` harmonics.
pub fn laplace_eigenvalue(k: usize) -> f64 {
    let k = k as f64;
    k * (k + 3.0)
}

/// Squared `L^2(S^4)` norm of `C_k^{3/2}(cos theta)`.
fn gegenbauer_norm_sq(k: usize) -> f64 {
    let k = k as f64;
    2.0 * PI * PI * (k + 1.0) * (k + 2.0) / (k + 1.5)
}

/// Orthonormal zonal harmonic `Z_k` evaluated at `x = cos(theta)`.
pub fn zonal_harmonic(k: usize, x: f64) -> f64 {
    gegenbauer(k, 1.5, x)[k] / gegenbauer_norm_sq(k).sqrt()
}

/// Value of `Z_k` at the north pole.
pub fn zonal_harmonic_at_pole(k: usize) -> f64 {
    let kf = k as f64;
    0.5 * (kf + 1.0) * (kf + 2.0) / gegenbauer_norm_sq(k).sqrt()
}

/// A point of `S^4` embedded in `R^5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint([f64; 5]);

impl SpherePoint {
    pub fn new(coords: [f64; 5]) -> Result<Self> {
        let n = norm(&coords);
        if (n - 1.0).abs() > 1e-12 {
            return Err(GeoError::Domain(format!("point has norm {n}, expected 1")));
        }
        Ok(Self(coords))
    }

    /// Normalises an arbitrary non-zero vector onto the sphere.
    pub fn normalized(coords: [f64; 5]) -> Result<Self> {
        let n = norm(&coords);
        if n == 0.0 || !n.is_finite() {
            return Err(GeoError::Domain("cannot normalise a zero vector".into()));
        }
        Ok(Self(coords.map(|c| c / n)))
    }

    pub fn north() -> Self {
        Self([1.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// Point at polar angle `theta` on the meridian through `e_1`.
    pub fn on_meridian(theta: f64) -> Self {
        Self([theta.cos(), theta.sin(), 0.0, 0.0, 0.0])
    }

    pub fn coords(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn antipode(&self) -> Self {
        Self(self.0.map(|c| -c))
    }

    /// Polar angle measured from the north pole `e_0`.
    pub fn polar_angle(&self) -> f64 {
        geodesic(&Self::north().0, &self.0)
    }

    /// Exponential map at `self` applied to a tangent vector.
    pub fn exp(&self, v: &[f64; 5]) -> SpherePoint {
        let t = norm(v);
        if t == 0.0 {
            return *self;
        }
        let (s, c) = t.sin_cos();
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = c * self.0[i] + s * v[i] / t;
        }
        // Re-normalise to stay on the sphere to machine precision.
        let n = norm(&out);
        SpherePoint(out.map(|x| x / n))
    }

    /// Riemannian logarithm: the tangent vector at `self` pointing to `y`
    /// with length `d(self, y)`. Undefined at the antipode.
    pub fn log(&self, y: &SpherePoint) -> Result<[f64; 5]> {
        let d = geodesic(&self.0, &y.0);
        if (PI - d).abs() < 1e-12 {
            return Err(GeoError::Domain("log map undefined at the antipode".into()));
        }
        let c = dot(&self.0, &y.0);
        let mut u = [0.0; 5];
        for i in 0..5 {
            u[i] = y.0[i] - c * self.0[i];
        }
        let n = norm(&u);
        if n == 0.0 {
            return Ok([0.0; 5]);
        }
        Ok(u.map(|x| d * x / n))
    }

    /// Orthogonal projection of an ambient vector onto `T_self S^4`.
    pub fn project_tangent(&self, v: &[f64; 5]) -> [f64; 5] {
        let c = dot(&self.0, v);
        let mut out = *v;
        for i in 0..5 {
            out[i] -= c * self.0[i];
        }
        out
    }
}

pub(crate) fn dot(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64; 5]) -> f64 {
    dot(a, a).sqrt()
}

fn geodesic(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    let mut diff = [0.0; 5];
    let mut sum = [0.0; 5];
    for i in 0..5 {
        diff[i] = a[i] - b[i];
        sum[i] = a[i] + b[i];
    }
    2.0 * norm(&diff).atan2(norm(&sum))
}

/// Great-circle distance in `[0, pi]`.
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    for p in [x, y] {
        let n = norm(&p.0);
        if (n - 1.0).abs() > 1e-12 {
            return Err(GeoError::Domain(format!("point has norm {n}, expected 1")));
        }
    }
    Ok(geodesic(&x.0, &y.0))
}

/// Volume of the geodesic ball of radius `r` in the round `S^4`.
pub fn ball_volume(r: f64) -> f64 {
    let r = r.clamp(0.0, PI);
    let c = r.cos();
    VOLUME_S3 * (2.0 / 3.0 - c + c * c * c / 3.0)
}

/// Polar angle of `exp_x(t u)` where `x` has polar angle `theta_x` and the
/// unit vector `u` makes angle `beta` with `d/dtheta` at `x`.
pub fn polar_angle_of_offset(theta_x: f64, t: f64, beta: f64) -> f64 {
    let c = theta_x.cos() * t.cos() - theta_x.sin() * t.sin() * beta.cos();
    c.clamp(-1.0, 1.0).acos()
}

/// Smooth cutoff: 1 on `|s| <= 1/4`, 0 on `|s| >= 1/2`, monotone between.
pub fn bump_psi(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.25 {
        return 1.0;
    }
    if a >= 0.5 {
        return 0.0;
    }
    let up = mollifier(0.5 - a);
    let down = mollifier(a - 0.25);
    up / (up + down)
}

/// Derivative of [`bump_psi`].
pub fn bump_psi_derivative(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.25 || a >= 0.5 {
        return 0.0;
    }
    let p = 0.5 - a;
    let q = a - 0.25;
    let (fp, fq) = (mollifier(p), mollifier(q));
    let (dfp, dfq) = (fp / (p * p), fq / (q * q));
    // d/da of fp/(fp+fq) with dp/da = -1, dq/da = 1
    let d = (-dfp * (fp + fq) - fp * (-dfp + dfq)) / ((fp + fq) * (fp + fq));
    d * s.signum()
}

fn mollifier(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Polar-angle grid with 4-volume quadrature weights and the zonal basis
/// tabulated at its nodes.
#[derive(Debug)]
pub struct ZonalGrid {
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    weights: Vec<f64>,
    k_max: usize,
    // basis[k][i] = Z_k(cos theta_i)
    basis: Vec<Vec<f64>>,
}

impl ZonalGrid {
    pub fn new(nodes: usize, k_max: usize) -> Result<Arc<Self>> {
        if nodes < 2 * k_max || nodes < 2 {
            return Err(GeoError::Resolution(format!(
                "{nodes} nodes cannot resolve band {k_max} (need at least {})",
                2 * k_max
            )));
        }
        let (x, w) = gauss_legendre(nodes);
        // theta increasing <=> x decreasing
        let cos_theta: Vec<f64> = x.iter().rev().copied().collect();
        let gl_w: Vec<f64> = w.iter().rev().copied().collect();
        let theta = cos_theta.iter().map(|c| c.acos()).collect();
        let weights = cos_theta
            .iter()
            .zip(&gl_w)
            .map(|(c, w)| VOLUME_S3 * (1.0 - c * c) * w)
            .collect();
        let mut basis = vec![vec![0.0; nodes]; k_max + 1];
        for (i, &c) in cos_theta.iter().enumerate() {
            let g = gegenbauer(k_max, 1.5, c);
            for k in 0..=k_max {
                basis[k][i] = g[k] / gegenbauer_norm_sq(k).sqrt();
            }
        }
        Ok(Arc::new(Self {
            theta,
            cos_theta,
            weights,
            k_max,
            basis,
        }))
    }

    pub fn default_grid() -> Arc<Self> {
        Self::new(DEFAULT_NODES, DEFAULT_KMAX).expect("default grid is resolved")
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self, k: usize) -> &[f64] {
        &self.basis[k]
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(GeoError::SizeMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }

    /// Weighted sum `sum_i w_i f_i`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples.len())?;
        Ok(self.weights.iter().zip(samples).map(|(w, f)| w * f).sum())
    }

    /// Projection onto `Z_0..Z_kmax`.
    pub fn transform(&self, samples: &[f64]) -> Result<Vec<f64>> {
        self.check_len(samples.len())?;
        let weighted: Vec<f64> = self.weights.iter().zip(samples).map(|(w, f)| w * f).collect();
        Ok(self
            .basis
            .iter()
            .map(|z| z.iter().zip(&weighted).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Synthesis of samples from coefficients (shorter vectors are padded).
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() > self.k_max + 1 {
            return Err(GeoError::Resolution(format!(
                "{} coefficients exceed band {}",
                coeffs.len(),
                self.k_max
            )));
        }
        let mut out = vec![0.0; self.len()];
        for (c, z) in coeffs.iter().zip(&self.basis) {
            if *c == 0.0 {
                continue;
            }
            for (o, zi) in out.iter_mut().zip(z) {
                *o += c * zi;
            }
        }
        Ok(out)
    }
}

/// Evaluates `sum_k c_k Z_k(x)` and its first `D-1` derivatives in `x`.
///
/// Uses `d^m/dx^m C_k^{3/2} = 2^m (3/2)_m C_{k-m}^{3/2+m}`.
pub fn zonal_series_jet<const D: usize>(coeffs: &[f64], x: f64) -> [f64; D] {
    let mut out = [0.0; D];
    if coeffs.is_empty() {
        return out;
    }
    let kmax = coeffs.len() - 1;
    let mut scale = 1.0;
    for (m, slot) in out.iter_mut().enumerate() {
        if m > 0 {
            scale *= 2.0 * (1.5 + (m - 1) as f64);
        }
        if m > kmax {
            break;
        }
        let c = gegenbauer(kmax - m, 1.5 + m as f64, x);
        let mut acc = 0.0;
        for k in m..=kmax {
            acc += coeffs[k] * c[k - m] / gegenbauer_norm_sq(k).sqrt();
        }
        *slot = scale * acc;
    }
    out
}

/// A function on `S^4` that depends only on the polar angle.
#[derive(Debug, Clone)]
pub struct ZonalField {
    grid: Arc<ZonalGrid>,
    samples: Vec<f64>,
    coeffs: Vec<f64>,
}

impl ZonalField {
    pub fn from_samples(grid: &Arc<ZonalGrid>, samples: Vec<f64>) -> Result<Self> {
        let coeffs = grid.transform(&samples)?;
        Ok(Self {
            grid: Arc::clone(grid),
            samples,
            coeffs,
        })
    }

    pub fn from_fn(grid: &Arc<ZonalGrid>, f: impl Fn(f64) -> f64) -> Self {
        let samples = grid.theta().iter().map(|&t| f(t)).collect();
        Self::from_samples(grid, samples).expect("sample count matches grid")
    }

    /// Band-limited field from coefficients `c_0..c_K`, `K <= k_max`.
    pub fn from_coeffs(grid: &Arc<ZonalGrid>, mut coeffs: Vec<f64>) -> Result<Self> {
        let samples = grid.inverse(&coeffs)?;
        coeffs.resize(grid.k_max() + 1, 0.0);
        Ok(Self {
            grid: Arc::clone(grid),
            samples,
            coeffs,
        })
    }

    pub fn zeros(grid: &Arc<ZonalGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            samples: vec![0.0; grid.len()],
            coeffs: vec![0.0; grid.k_max() + 1],
        }
    }

    pub fn constant(grid: &Arc<ZonalGrid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn grid(&self) -> &Arc<ZonalGrid> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn integrate(&self) -> f64 {
        zonal_quadrature(self)
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / VOLUME_S4
    }

    /// Sample-space relative residual of the truncated expansion; zero
    /// (to rounding) for fields inside the band.
    pub fn band_residual(&self) -> f64 {
        let rec = self.grid.inverse(&self.coeffs).expect("coeffs fit band");
        let num: f64 = self
            .samples
            .iter()
            .zip(&rec)
            .zip(self.grid.weights())
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum();
        let den: f64 = self
            .samples
            .iter()
            .zip(self.grid.weights())
            .map(|(a, w)| w * a * a)
            .sum();
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }

    /// Relative `l^2` weight of the top eighth of the band.
    pub fn spectral_tail(&self) -> f64 {
        let total: f64 = self.coeffs.iter().map(|c| c * c).sum();
        if total == 0.0 {
            return 0.0;
        }
        let start = self.coeffs.len() - self.coeffs.len() / 8;
        let tail: f64 = self.coeffs[start..].iter().map(|c| c * c).sum();
        (tail / total).sqrt()
    }

    /// Copy with coefficients below `rel * max |c_k|` set to zero. Removes
    /// transform round-off before high-order operators amplify it.
    pub fn denoised(&self, rel: f64) -> Self {
        let m = self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let cut = rel * m;
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| if c.abs() < cut { 0.0 } else { c })
            .collect();
        Self::from_coeffs(&self.grid, coeffs).expect("same band")
    }

    /// Coefficientwise map `c_k -> m(k) c_k`.
    pub fn spectral_multiply(&self, m: impl Fn(usize) -> f64) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(k, c)| m(k) * c).collect();
        Self::from_coeffs(&self.grid, coeffs).expect("same band")
    }

    pub fn laplacian(&self) -> Self {
        laplacian_zonal(self)
    }

    /// Value and `x`-derivatives of the band-limited expansion at `x = cos theta`.
    pub fn jet<const D: usize>(&self, x: f64) -> [f64; D] {
        zonal_series_jet::<D>(&self.coeffs, x)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.jet::<1>(theta.cos())[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let s = self.samples.iter().map(|&v| f(v)).collect();
        Self::from_samples(&self.grid, s).expect("same grid")
    }

    pub fn zip_with(&self, other: &ZonalField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_len(other.samples.len())?;
        let s = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self::from_samples(&self.grid, s)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            samples: self.samples.iter().map(|v| c * v).collect(),
            coeffs: self.coeffs.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.samples
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| w * v.abs())
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.samples
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// CSV with columns `theta,weight,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,weight,value\n");
        for ((t, w), v) in self.grid.theta().iter().zip(self.grid.weights()).zip(&self.samples) {
            let _ = writeln!(s, "{t:.17e},{w:.17e},{v:.17e}");
        }
        s
    }

    /// CSV with columns `k,coeff`.
    pub fn coeffs_to_csv(&self) -> String {
        let mut s = String::from("k,coeff\n");
        for (k, c) in self.coeffs.iter().enumerate() {
            let _ = writeln!(s, "{k},{c:.17e}");
        }
        s
    }

    /// Reads the `theta,weight,value` layout back onto a grid with the same nodes.
    pub fn from_csv(grid: &Arc<ZonalGrid>, csv: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (line_no, line) in csv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(GeoError::Parse(format!("line {}: expected 3 columns", line_no + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| GeoError::Parse(format!("line {}: {e}", line_no + 1)))
            };
            let theta = parse(cols[0])?;
            let idx = values.len();
            if idx >= grid.len() || (grid.theta()[idx] - theta).abs() > 1e-12 {
                return Err(GeoError::Parse(format!(
                    "line {}: node {theta} does not match the grid",
                    line_no + 1
                )));
            }
            values.push(parse(cols[2])?);
        }
        Self::from_samples(grid, values)
    }
}

/// `sum_i w_i f(theta_i)`, the 4-volume integral of a zonal field.
pub fn zonal_quadrature(f: &ZonalField) -> f64 {
    f.grid.integrate(&f.samples).expect("field lives on its grid")
}

/// Forward and inverse zonal-harmonic transforms.
pub fn zonal_transform(grid: &Arc<ZonalGrid>, samples: &[f64]) -> Result<Vec<f64>> {
    grid.transform(samples)
}

pub fn zonal_inverse(grid: &Arc<ZonalGrid>, coeffs: &[f64]) -> Result<Vec<f64>> {
    grid.inverse(coeffs)
}

/// Round-sphere Laplacian (non-positive) applied spectrally.
pub fn laplacian_zonal(f: &ZonalField) -> ZonalField {
    f.spectral_multiply(|k| -laplace_eigenvalue(k))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_and_parseval(coeffs in proptest::collection::vec(-1.0f64..1.0, 1..=33)) {
            let g = ZonalGrid::new(80, 32).unwrap();
            let f = ZonalField::from_coeffs(&g, coeffs.clone()).unwrap();
            let back = ZonalField::from_samples(&g, f.samples().to_vec()).unwrap();
            for (k, c) in back.coeffs().iter().enumerate() {
                let e = coeffs.get(k).copied().unwrap_or(0.0);
                prop_assert!((c - e).abs() < 1e-9);
            }
            let energy: f64 = coeffs.iter().map(|c| c * c).sum();
            prop_assert!((f.l2_norm().powi(2) - energy).abs() < 1e-9 * (1.0 + energy));
        }

        #[test]
        fn distance_is_a_metric(a in proptest::array::uniform5(-1.0f64..1.0),
                                b in proptest::array::uniform5(-1.0f64..1.0),
                                c in proptest::array::uniform5(-1.0f64..1.0)) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3 && norm(&c) > 1e-3);
            let (x, y, z) = (SpherePoint::normalized(a).unwrap(), SpherePoint::normalized(b).unwrap(),
                             SpherePoint::normalized(c).unwrap());
            let dxy = geodesic_distance(&x, &y).unwrap();
            prop_assert!((0.0..=PI).contains(&dxy));
            prop_assert!((dxy - geodesic_distance(&y, &x).unwrap()).abs() < 1e-15);
            let dxz = geodesic_distance(&x, &z).unwrap();
            let dzy = geodesic_distance(&z, &y).unwrap();
            prop_assert!(dxy <= dxz + dzy + 1e-12);
        }
    }
}
