//! Test-only oracles that share no code with the library's curvature paths.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat4 = [[f64; 4]; 4];

/// Curvature invariants of a metric given in coordinates, computed from
/// finite-difference Christoffel symbols.
#[derive(Debug, Clone, Copy)]
pub struct FdCurvature {
    pub ric: Mat4,
    pub r: f64,
    pub norm_e2: f64,
    /// `|W|^2` summed over all index orderings.
    pub norm_w2_full: f64,
}

fn inverse(m: &Mat4) -> Mat4 {
    let a = nalgebra::Matrix4::from_fn(|i, j| m[i][j]);
    let inv = a.try_inverse().expect("metric is invertible");
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = inv[(i, j)];
        }
    }
    out
}

fn shifted(p: [f64; 4], k: usize, d: f64) -> [f64; 4] {
    let mut q = p;
    q[k] += d;
    q
}

/// Fourth-order central difference of a vector-valued function along axis `k`.
fn d4<const N: usize>(f: &dyn Fn([f64; 4]) -> [f64; N], p: [f64; 4], k: usize, h: f64) -> [f64; N] {
    let (a, b, c, d) = (
        f(shifted(p, k, -2.0 * h)),
        f(shifted(p, k, -h)),
        f(shifted(p, k, h)),
        f(shifted(p, k, 2.0 * h)),
    );
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = (a[i] - 8.0 * b[i] + 8.0 * c[i] - d[i]) / (12.0 * h);
    }
    out
}

fn flat(m: &Mat4) -> [f64; 16] {
    let mut o = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            o[4 * i + j] = m[i][j];
        }
    }
    o
}

/// `Gamma^a_{bc}` flattened as `16 a + 4 b + c`.
fn christoffel(g: &dyn Fn([f64; 4]) -> Mat4, p: [f64; 4], h: f64) -> [f64; 64] {
    let gf = |q: [f64; 4]| flat(&g(q));
    let dg: Vec<[f64; 16]> = (0..4).map(|k| d4(&gf, p, k, h)).collect();
    let ginv = inverse(&g(p));
    let mut out = [0.0; 64];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let mut s = 0.0;
                for d in 0..4 {
                    s += ginv[a][d] * (dg[b][4 * d + c] + dg[c][4 * d + b] - dg[d][4 * b + c]);
                }
                out[16 * a + 4 * b + c] = 0.5 * s;
            }
        }
    }
    out
}

pub fn fd_curvature(g: &dyn Fn([f64; 4]) -> Mat4, p: [f64; 4], h: f64) -> FdCurvature {
    let gam = |q: [f64; 4]| christoffel(g, q, h);
    let dgam: Vec<[f64; 64]> = (0..4).map(|k| d4(&gam, p, k, h)).collect();
    let gm = gam(p);
    let gg = |a: usize, b: usize, c: usize| gm[16 * a + 4 * b + c];
    // R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}
    let mut riem = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = dgam[c][16 * a + 4 * d + b] - dgam[d][16 * a + 4 * c + b];
                    for e in 0..4 {
                        v += gg(a, c, e) * gg(e, d, b) - gg(a, d, e) * gg(e, c, b);
                    }
                    riem[a][b][c][d] = v;
                }
            }
        }
    }
    let gl = g(p);
    let gi = inverse(&gl);
    let mut ric = [[0.0; 4]; 4];
    for b in 0..4 {
        for d in 0..4 {
            ric[b][d] = (0..4).map(|a| riem[a][b][a][d]).sum();
        }
    }
    let mut r = 0.0;
    for b in 0..4 {
        for d in 0..4 {
            r += gi[b][d] * ric[b][d];
        }
    }
    // raise/lower to get |Rm|^2 and |Ric|^2
    let mut lower = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    lower[a][b][c][d] = (0..4).map(|e| gl[a][e] * riem[e][b][c][d]).sum();
                }
            }
        }
    }
    let mut rm2 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut up = 0.0;
                    for a2 in 0..4 {
                        for b2 in 0..4 {
                            for c2 in 0..4 {
                                for d2 in 0..4 {
                                    up += gi[a][a2] * gi[b][b2] * gi[c][c2] * gi[d][d2] * lower[a2][b2][c2][d2];
                                }
                            }
                        }
                    }
                    rm2 += up * lower[a][b][c][d];
                }
            }
        }
    }
    let mut ric2 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    ric2 += gi[a][c] * gi[b][d] * ric[a][b] * ric[c][d];
                }
            }
        }
    }
    FdCurvature {
        ric,
        r,
        norm_e2: ric2 - r * r / 4.0,
        norm_w2_full: rm2 - 2.0 * ric2 + r * r / 3.0,
    }
}

/// Random band-limited zonal coefficients, rescaled so `sup |w| <= amp`.
pub fn random_coeffs(seed: u64, degree: usize, amp: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=degree)
        .map(|k| amp * rng.gen_range(-1.0..1.0) / (1.0 + k as f64).powi(2))
        .collect()
}

/// Relative l2 distance between two samples.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Fourth-order Runge–Kutta for a scalar ODE.
pub fn rk4_scalar(f: impl Fn(f64, f64) -> f64, y0: f64, t1: f64, steps: usize) -> f64 {
    let h = t1 / steps as f64;
    let mut y = y0;
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = f(t, y);
        let k2 = f(t + h / 2.0, y + h * k1 / 2.0);
        let k3 = f(t + h / 2.0, y + h * k2 / 2.0);
        let k4 = f(t + h, y + h * k3);
        y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    y
}
