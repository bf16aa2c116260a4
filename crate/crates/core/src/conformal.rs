//! Metrics `e^{2w} g_round` with a zonal conformal factor `w`.
//!
//! Everything is written in `x = cos(theta)`, where the round Laplacian of a
//! zonal function reads `(1 - x^2) f'' - 4 x f'`.

use std::sync::Arc;

use crate::curvature::CurvatureReport;
use crate::error::{GeoError, Result};
use crate::paneitz::paneitz_apply;
use crate::sphere::{ZonalField, ZonalGrid};

/// Relative size of the top spectral band above which a factor counts as unresolved.
pub const RESOLUTION_TOL: f64 = 1e-8;

/// Coefficients smaller than this fraction of the largest are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct ConformalRoundMetric {
    w: ZonalField,
}

impl ConformalRoundMetric {
    pub fn new(w: ZonalField) -> Result<Self> {
        let tail = w.spectral_tail();
        let residual = w.band_residual();
        if tail > RESOLUTION_TOL || residual > RESOLUTION_TOL {
            return Err(GeoError::Resolution(format!(
                "conformal factor not resolved by band {} (tail {tail:.2e}, residual {residual:.2e})",
                w.grid().k_max()
            )));
        }
        Ok(Self {
            w: w.denoised(NOISE_FLOOR),
        })
    }

    pub fn round(grid: &Arc<ZonalGrid>) -> Self {
        Self {
            w: ZonalField::zeros(grid),
        }
    }

    /// Pullback of the round metric by the conformal dilation with parameter
    /// `lambda` fixing both poles.
    pub fn mobius(grid: &Arc<ZonalGrid>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(GeoError::Domain(format!("dilation factor must be positive, got {lambda}")));
        }
        Self::new(ZonalField::from_fn(grid, |t| mobius_factor(lambda, t.cos())))
    }

    pub fn w(&self) -> &ZonalField {
        &self.w
    }

    pub fn grid(&self) -> &Arc<ZonalGrid> {
        self.w.grid()
    }

    /// `e^{4w}` times the round weights.
    pub fn volume_weights(&self) -> Vec<f64> {
        self.grid()
            .weights()
            .iter()
            .zip(self.w.samples())
            .map(|(g, w)| g * (4.0 * w).exp())
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.volume_weights().iter().sum()
    }
}

/// Conformal factor of the dilation `y -> lambda y` in stereographic coordinates.
pub fn mobius_factor(lambda: f64, x: f64) -> f64 {
    (2.0 * lambda).ln() - ((1.0 + lambda * lambda) + (1.0 - lambda * lambda) * x).ln()
}

/// Pointwise curvature of `e^{2u} g_round` from the `x`-jet `[u, u', u'', u''', u'''']`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalPoint {
    pub r: f64,
    pub norm_e2: f64,
    pub q: f64,
}

pub fn conformal_point(x: f64, u: [f64; 5]) -> ConformalPoint {
    let [u0, u1, u2, u3, u4] = u;
    let q = 1.0 - x * x;
    // S = e^{2u} R and its x-derivatives
    let s = 12.0 - 6.0 * (q * u2 - 4.0 * x * u1) - 6.0 * q * u1 * u1;
    let s1 = -6.0 * (q * u3 - 6.0 * x * u2 - 4.0 * u1) + 12.0 * x * u1 * u1 - 12.0 * q * u1 * u2;
    let s2 = -6.0 * (q * u4 - 8.0 * x * u3 - 10.0 * u2)
        - 6.0 * (-2.0 * u1 * u1 - 8.0 * x * u1 * u2 + 2.0 * q * (u2 * u2 + u1 * u3));
    let e = (-2.0 * u0).exp();
    let r = e * s;
    let r1 = e * (s1 - 2.0 * u1 * s);
    let r2 = e * (s2 - 4.0 * u1 * s1 + (4.0 * u1 * u1 - 2.0 * u2) * s);
    let lap_round = q * r2 - 4.0 * x * r1;
    let lap = e * (lap_round + 2.0 * q * u1 * r1);
    let tl = q * (u2 - u1 * u1);
    let norm_e2 = 3.0 * e * e * tl * tl;
    let qc = (-lap + 0.25 * r * r - 3.0 * norm_e2) / 12.0;
    ConformalPoint { r, norm_e2, q: qc }
}

/// Curvature report of a conformally round metric. `W` and `B` vanish identically.
pub fn conformal_curvature(m: &ConformalRoundMetric) -> CurvatureReport {
    let grid = m.grid();
    let n = grid.len();
    let mut r = Vec::with_capacity(n);
    let mut e2 = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for &x in grid.cos_theta() {
        let p = conformal_point(x, m.w.jet::<5>(x));
        r.push(p.r);
        e2.push(p.norm_e2);
        q.push(p.q);
    }
    CurvatureReport::new(
        grid.theta().to_vec(),
        m.volume_weights(),
        r,
        e2,
        vec![0.0; n],
        vec![0.0; n],
        q,
    )
}

/// `Q` from the transformation law `P w + 6 = 2 Q e^{4w}` on the round background.
pub fn q_via_transformation(m: &ConformalRoundMetric) -> ZonalField {
    let pw = paneitz_apply(&m.w);
    let s = pw
        .samples()
        .iter()
        .zip(m.w.samples())
        .map(|(p, w)| 0.5 * (-4.0 * w).exp() * (p + 6.0))
        .collect();
    ZonalField::from_samples(m.grid(), s).expect("same grid")
}

/// Strain and divergence of a meridional field `a(theta) d/dtheta` measured
/// in the metric `e^{2w} g_round`.
///
/// `a` is given as `a = sin(theta) b(cos theta)` through the zonal field `b`,
/// so the field is smooth at the poles.
pub fn meridional_strain(b: &ZonalField, w: Option<&ZonalField>) -> (f64, ZonalField) {
    let grid = b.grid();
    let mut sup: f64 = 0.0;
    let mut div = Vec::with_capacity(grid.len());
    for (&x, &th) in grid.cos_theta().iter().zip(grid.theta()) {
        let [bv, bx] = b.jet::<2>(x);
        let st = th.sin();
        let q = 1.0 - x * x;
        let a = st * bv;
        // d a / d theta
        let da = x * bv - q * bx;
        let wp = match w {
            Some(w) => -st * w.jet::<2>(x)[1],
            None => 0.0,
        };
        // a cot(theta) written without the division
        let a_cot = x * bv;
        let d = da + 4.0 * a * wp + 3.0 * a_cot;
        let radial = da + a * wp;
        // strain eigenvalues radial - d/4 (once) and tangential - d/4 (three times);
        // their g-norm is the same whatever the conformal factor
        let s_rad = radial - 0.25 * d;
        let s_tan = a * wp + a_cot - 0.25 * d;
        sup = sup.max(s_rad.abs().max(s_tan.abs()));
        div.push(d);
    }
    let div = ZonalField::from_samples(grid, div).expect("same grid");
    (sup, div)
}
