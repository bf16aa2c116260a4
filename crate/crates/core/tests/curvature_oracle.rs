mod common;

use common::{fd_curvature, random_coeffs, rel_l2, Mat4};
use geoflow_core::conformal::{conformal_point, q_via_transformation, ConformalRoundMetric};
use geoflow_core::sphere::{ZonalField, ZonalGrid};
use geoflow_core::warped::WarpedAxisymMetric;

fn conformal_metric(w: &ZonalField) -> impl Fn([f64; 4]) -> Mat4 + '_ {
    move |y: [f64; 4]| {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let x = (1.0 - r2) / (1.0 + r2);
        let wv = w.jet::<1>(x)[0];
        let c = (2.0 * wv).exp() * 4.0 / ((1.0 + r2) * (1.0 + r2));
        let mut g = [[0.0; 4]; 4];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = c;
        }
        g
    }
}

#[test]
fn conformal_curvature_matches_coordinate_oracle() {
    let grid = ZonalGrid::new(128, 48).unwrap();
    for seed in 0..3u64 {
        let w = ZonalField::from_coeffs(&grid, random_coeffs(seed, 10, 0.8)).unwrap();
        let g = conformal_metric(&w);
        let (mut r_lib, mut r_fd, mut e_lib, mut e_fd) = (vec![], vec![], vec![], vec![]);
        for i in 0..10 {
            let rho = 0.15 + 0.25 * i as f64;
            let dir = [0.5, -0.5, 0.5, 0.5];
            let y = dir.map(|d| d * rho);
            let fd = fd_curvature(&g, y, 1e-3);
            let r2 = rho * rho;
            let x = (1.0 - r2) / (1.0 + r2);
            let p = conformal_point(x, w.jet::<5>(x));
            r_lib.push(p.r);
            r_fd.push(fd.r);
            e_lib.push(p.norm_e2);
            e_fd.push(fd.norm_e2);
            assert!(fd.norm_w2_full.abs() < 1e-6 * (1.0 + fd.r * fd.r));
        }
        let er = rel_l2(&r_lib, &r_fd);
        let ee = rel_l2(&e_lib, &e_fd);
        assert!(er < 1e-6, "seed {seed}: R rel err {er}");
        assert!(ee < 1e-6, "seed {seed}: |E|^2 rel err {ee}");
    }
}

#[test]
fn transformation_law_agrees_with_direct_formula() {
    let grid = ZonalGrid::new(128, 48).unwrap();
    let w = ZonalField::from_coeffs(&grid, random_coeffs(42, 12, 0.5)).unwrap();
    let m = ConformalRoundMetric::new(w).unwrap();
    let q1 = q_via_transformation(&m);
    let rep = geoflow_core::conformal::conformal_curvature(&m);
    assert!(rel_l2(q1.samples(), &rep.q) < 1e-8);
}

fn warped_coords(m: &WarpedAxisymMetric) -> impl Fn([f64; 4]) -> Mat4 + '_ {
    move |p: [f64; 4]| {
        let (f, h) = (m.f_jet(p[0])[0], m.h_jet(p[0])[0]);
        let mut g = [[0.0; 4]; 4];
        g[0][0] = 1.0;
        g[1][1] = f * f;
        g[2][2] = h * h;
        g[3][3] = h * h * p[2].sin().powi(2);
        g
    }
}

#[test]
fn warped_curvature_matches_coordinate_oracle() {
    let m = WarpedAxisymMetric::squashed(0.08, -0.06).unwrap();
    let g = warped_coords(&m);
    let mut lib = vec![];
    let mut fd = vec![];
    for i in 1..12 {
        let s = i as f64 * m.length() / 12.0;
        let loc = m.local(s);
        let o = fd_curvature(&g, [s, 0.3, 1.1, 0.7], 1e-3);
        let (f, h) = (m.f_jet(s)[0], m.h_jet(s)[0]);
        lib.extend([loc.ric[0], loc.ric[1], loc.ric[2], loc.r, loc.norm_e2, loc.norm_w2]);
        fd.extend([
            o.ric[0][0],
            o.ric[1][1] / (f * f),
            o.ric[2][2] / (h * h),
            o.r,
            o.norm_e2,
            o.norm_w2_full / 4.0,
        ]);
    }
    let err = rel_l2(&lib, &fd);
    assert!(err < 1e-5, "relative error {err}");
    // the family genuinely has Weyl curvature
    assert!(fd.chunks(6).any(|c| c[5] > 1e-4));
}
