//! Scenario runners: each builds a [`Report`] from a validated [`Scenario`].

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use geoflow_core::conformal::{conformal_curvature, q_via_transformation, ConformalRoundMetric};
use geoflow_core::curvature::{yamabe_bounds, GAUSS_BONNET_S4};
use geoflow_core::paneitz::{paneitz_apply, paneitz_solve, GreenKernel, PaneitzSpectrum, LOG_COEFF};
use geoflow_core::qcflow::{
    budget_recursion, dilatation_budget, jacobian_comparability, map_diagnostics, run_qc_iteration,
    QcOptions, BUDGET_BASE,
};
use geoflow_core::quadrature::linear_fit;
use geoflow_core::ricci::{
    bach_inequality_check, drift_and_bilip, ricci_evolve, yamabe_normalize, DriftReport,
    FlowDiagnostics, FlowOptions, RicciState, DECAY_BETA_GATE,
};
use geoflow_core::sphere::{ZonalField, ZonalGrid, VOLUME_S4};
use geoflow_core::testdata::{conformal_factor_for_alpha, random_zonal, warped_for_beta};
use geoflow_core::warped::{warped_curvature, WarpedAxisymMetric};

use crate::config::{Kind, Scenario};
use crate::report::Report;
use crate::svg::{line_plot, Scale, Series};
use crate::CliError;

pub fn run(s: &Scenario) -> Result<Report, CliError> {
    s.validate()?;
    match s.kind {
        Kind::Paneitz => paneitz(s),
        Kind::Green => green(s),
        Kind::Qcflow => qcflow(s),
        Kind::Ricciflow => ricciflow(s),
        Kind::Compose => compose(s),
    }
}

fn grid(s: &Scenario) -> Result<Arc<ZonalGrid>, CliError> {
    Ok(ZonalGrid::new(s.resolution, s.k_max())?)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------

fn paneitz(s: &Scenario) -> Result<Report, CliError> {
    let g = grid(s)?;
    let mut r = Report::new(s);
    r.table("spectrum", PaneitzSpectrum::new(g.k_max()).to_csv());

    let mut roundtrip: f64 = 0.0;
    let mut q_err: f64 = 0.0;
    let mut worst_seed = s.seed;
    for i in 0..s.parameters.samples as u64 {
        let w = random_zonal(s.seed + i, &g, 8);
        let w = w.scale(0.3 / w.sup_norm());
        // P is invertible on mean-zero fields
        let f = w.zip_with(&ZonalField::constant(&g, w.mean()), |a, b| a - b)?;
        let back = paneitz_solve(&paneitz_apply(&f))?;
        roundtrip = roundtrip.max(rel_l2(back.samples(), f.samples()));
        let m = ConformalRoundMetric::new(w)?;
        let e = rel_l2(q_via_transformation(&m).samples(), &conformal_curvature(&m).q);
        if e > q_err {
            q_err = e;
            worst_seed = s.seed + i;
        }
    }
    // tabulate the worst factor
    let w = random_zonal(worst_seed, &g, 8);
    let m = ConformalRoundMetric::new(w.scale(0.3 / w.sup_norm()))?;
    let law = q_via_transformation(&m);
    let direct = conformal_curvature(&m).q;
    let mut csv = String::from("theta,Q_direct,Q_law\n");
    for (i, t) in g.theta().iter().enumerate() {
        let _ = writeln!(csv, "{t:.17e},{:.17e},{:.17e}", direct[i], law.samples()[i]);
    }
    r.table("q_compare", csv);
    let pts = |v: &[f64]| g.theta().iter().cloned().zip(v.iter().cloned()).collect::<Vec<_>>();
    r.figure(
        "q_compare",
        line_plot(
            &format!("Q curvature, seed {worst_seed}"),
            "theta",
            "Q",
            &[Series::new("direct", pts(&direct)), Series::new("transformation law", pts(law.samples()))],
            Scale::Linear,
        ),
    );

    let mut mobius: f64 = 0.0;
    for lambda in [0.6, 0.8, 1.25, 1.5, 1.8] {
        let q = q_via_transformation(&ConformalRoundMetric::mobius(&g, lambda)?);
        mobius = q.samples().iter().fold(mobius, |a, v| a.max((v - 3.0).abs()));
    }
    r.check_le("paneitz_roundtrip", roundtrip, 1e-10, "P^-1 P on mean-zero fields, worst rel L2");
    r.check_le(
        "q_transformation_law",
        q_err,
        1e-6,
        format!("{} factors with sup|w| = 0.3, worst rel L2", s.parameters.samples),
    );
    r.check_le("mobius_q", mobius, 1e-7, "sup|Q - 3| over five Moebius factors");
    Ok(r)
}

// ---------------------------------------------------------------------------

fn green(s: &Scenario) -> Result<Report, CliError> {
    let kt = s.parameters.kernel_truncation;
    let k1 = GreenKernel::new(kt)?;
    let k2 = GreenKernel::new(2 * kt)?;
    let mut r = Report::new(s);
    r.table("kernel", k2.to_csv());
    let d: Vec<f64> = (0..20).map(|i| 1e-3 * 10f64.powf(i as f64 / 19.0)).collect();
    let x: Vec<f64> = d.iter().map(|d| (1.0 / d).ln()).collect();
    let y: Vec<f64> = d.iter().map(|&d| k2.g(d)).collect();
    let (slope, _) = linear_fit(&x, &y);
    let slope_err = (slope / LOG_COEFF - 1.0).abs();
    let h_change = (k2.sup_abs_h() / k1.sup_abs_h() - 1.0).abs();
    let series = |k: &GreenKernel, name: &str| {
        Series::new(name, k.distances().iter().cloned().zip(k.h_values().iter().cloned()).collect())
    };
    r.figure(
        "kernel",
        line_plot(
            "smooth part h of the Green kernel",
            "geodesic distance",
            "h",
            &[series(&k1, &format!("K = {kt}")), series(&k2, &format!("K = {}", 2 * kt))],
            Scale::Linear,
        ),
    );
    r.quantity("log_slope", slope);
    r.quantity("sup_abs_h", k2.sup_abs_h());
    r.check_le("log_slope", slope_err, 0.01, "|slope / (1/8pi^2) - 1| on d in [1e-3, 1e-2]");
    r.check_le("h_stability", h_change, 0.01, format!("relative change of sup|h| from K = {kt} to {}", 2 * kt));
    Ok(r)
}

// ---------------------------------------------------------------------------

struct QcPoint {
    alpha: f64,
    l: f64,
    dev: f64,
    c: f64,
    jac: f64,
    excess: f64,
    dilatation: f64,
}

fn qc_sweep(s: &Scenario, r: &mut Report) -> Result<Vec<QcPoint>, CliError> {
    let g = grid(s)?;
    let opt = QcOptions {
        steps: s.parameters.steps,
        kernel_truncation: s.parameters.kernel_truncation,
        ..Default::default()
    };
    let mut trace = String::from("alpha,step,t,strain_sup,dilatation,jacobian_residual,b_inf\n");
    let mut pts = vec![];
    let mut last_map = None;
    for &alpha in &s.parameters.alphas {
        let (w, eta) = conformal_factor_for_alpha(s.seed, &g, alpha)?;
        let run = run_qc_iteration(&eta, opt)?;
        for line in run.trace_csv().lines().skip(1) {
            let _ = writeln!(trace, "{alpha:.6e},{line}");
        }
        let (dev, c) = jacobian_comparability(&run.map, &eta);
        let d = map_diagnostics(&run.map, &ConformalRoundMetric::new(w)?, &ConformalRoundMetric::round(&g));
        pts.push(QcPoint {
            alpha,
            l: d.l_fwd * d.l_inv,
            dev,
            c,
            jac: run.max_jacobian_residual(),
            excess: run.dilatation_excess(),
            dilatation: d.k,
        });
        last_map = Some(run.map);
    }
    r.table("flow_trace", trace);
    if let Some(m) = last_map {
        r.table("final_map", m.to_csv());
    }
    Ok(pts)
}

fn qcflow(s: &Scenario) -> Result<Report, CliError> {
    let mut r = Report::new(s);
    let pts = qc_sweep(s, &mut r)?;

    let mut sweep = String::from("alpha,L,K,jacobian_residual,dilatation_excess,jacobian_dev,c\n");
    for p in &pts {
        let _ = writeln!(
            sweep,
            "{:.6e},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e},{:.6e}",
            p.alpha, p.l, p.dilatation, p.jac, p.excess, p.dev, p.c
        );
    }
    r.table("sweep", sweep);

    // fit dev = C alpha through the origin
    let nz: Vec<&QcPoint> = pts.iter().filter(|p| p.alpha > 0.0).collect();
    let num: f64 = nz.iter().map(|p| p.dev * p.alpha).sum();
    let den: f64 = nz.iter().map(|p| p.alpha * p.alpha).sum();
    let c_fit = if den > 0.0 { num / den } else { 0.0 };
    let mut fit = String::from("alpha,jacobian_dev,fit\n");
    for p in &pts {
        let _ = writeln!(fit, "{:.6e},{:.12e},{:.12e}", p.alpha, p.dev, c_fit * p.alpha);
    }
    r.table("jacobian_fit", fit);
    r.figure(
        "jacobian_fit",
        line_plot(
            "Jacobian comparability",
            "alpha",
            "sup |log J + c - L|",
            &[
                Series::new("measured", pts.iter().map(|p| (p.alpha, p.dev)).collect()),
                Series::new(format!("C alpha, C = {c_fit:.3e}"), pts.iter().map(|p| (p.alpha, c_fit * p.alpha)).collect()),
            ],
            Scale::Linear,
        ),
    );
    r.figure(
        "dilatation",
        line_plot(
            "final dilatation and bilipschitz constant",
            "alpha",
            "value - 1",
            &[
                Series::new("K - 1", pts.iter().map(|p| (p.alpha, p.dilatation - 1.0)).collect()),
                Series::new("L - 1", pts.iter().map(|p| (p.alpha, p.l - 1.0)).collect()),
            ],
            Scale::Log,
        ),
    );

    let jac = pts.iter().fold(0.0f64, |m, p| m.max(p.jac));
    let excess = pts.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.excess));
    r.quantity("jacobian_constant", c_fit);
    r.check_le("jacobian_identity", jac, 1e-4, "sup |log J - int div v| over the sweep");
    r.check_le("dilatation_bound", excess, 1e-3, "max of log K - 4 t sup strain");
    if nz.len() >= 2 {
        let resid = nz
            .iter()
            .map(|p| (p.dev - c_fit * p.alpha).abs() / (c_fit * p.alpha).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let lx: Vec<f64> = nz.iter().map(|p| p.alpha.ln()).collect();
        let ly: Vec<f64> = nz.iter().map(|p| (p.l - 1.0).max(f64::MIN_POSITIVE).ln()).collect();
        let (slope, _) = linear_fit(&lx, &ly);
        let monotone = nz.windows(2).all(|w| w[1].l >= w[0].l);
        r.quantity("bilip_loglog_slope", slope);
        r.check_le("jacobian_linear_fit", resid, 0.2, "max relative residual of dev = C alpha");
        r.check_bool("bilip_monotone", monotone, format!("L - 1 = {}", fmt_list(&nz.iter().map(|p| p.l - 1.0).collect::<Vec<_>>())));
        r.check_ge("bilip_slope", slope, 0.8, "log-log slope of L - 1 against alpha");
    }

    // closed-form dilatation budget against its recursion
    // an infeasible budget is a failed check, not an error
    let mut ok = true;
    let mut infeasible = vec![];
    for p in &nz {
        let eps = 4.0 * p.alpha;
        match dilatation_budget(BUDGET_BASE, eps) {
            Ok(m0) => ok &= budget_recursion(BUDGET_BASE, eps, s.parameters.steps)[s.parameters.steps] <= m0,
            Err(_) => {
                ok = false;
                infeasible.push(p.alpha);
            }
        }
    }
    let detail = if infeasible.is_empty() {
        "M_k(k) <= M_0(1) at eps = 4 alpha".to_string()
    } else {
        format!("budget infeasible at alpha = {}", fmt_list(&infeasible))
    };
    r.check_bool("budget_recursion", ok, detail);
    Ok(r)
}

// ---------------------------------------------------------------------------

struct FlowRun {
    beta: f64,
    diag: FlowDiagnostics,
    drift: DriftReport,
}

fn flow_options(s: &Scenario) -> FlowOptions {
    FlowOptions {
        modes: s.parameters.flow_modes,
        nodes: s.resolution,
        report_nodes: 2 * s.resolution,
        ..Default::default()
    }
}

/// `sup |R - Rbar|` along a flow from the round metric: the round-off floor.
fn noise_floor(s: &Scenario) -> Result<f64, CliError> {
    let st = RicciState::new(WarpedAxisymMetric::round(), 2 * s.resolution);
    let (_, d) = ricci_evolve(&st, 0.5, 10, flow_options(s))?;
    Ok(d.samples.iter().fold(0.0f64, |m, p| m.max(p.r_dev)))
}

fn flow_sweep(s: &Scenario, r: &mut Report) -> Result<Vec<FlowRun>, CliError> {
    let opt = flow_options(s);
    let mut runs = vec![];
    for (i, &beta) in s.parameters.betas.iter().enumerate() {
        let m = warped_for_beta(s.seed, beta)?;
        let y = yamabe_normalize(&m)?;
        let st = RicciState::new(y.metric, opt.report_nodes);
        let (_, diag) = ricci_evolve(&st, s.parameters.t_end, 100, opt)?;
        r.table(&format!("diagnostics_{i}"), diag.to_csv());
        let it = st.report.integrals;
        runs.push(FlowRun {
            beta: it.beta,
            drift: drift_and_bilip(&diag, it.beta, it.gamma),
            diag,
        });
    }
    Ok(runs)
}

/// Log-linear slope and r^2 of `sup |R - Rbar|` over `t >= 1`, above `100 floor`.
fn tail_fit(d: &FlowDiagnostics, floor: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = d
        .samples
        .iter()
        .filter(|p| p.t >= 1.0 - 1e-9 && p.r_dev > 100.0 * floor)
        .map(|p| (p.t, p.r_dev.ln()))
        .collect();
    if pts.len() < 5 {
        return None;
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, icpt) = linear_fit(&x, &y);
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let res: f64 = x.iter().zip(&y).map(|(x, y)| (y - slope * x - icpt).powi(2)).sum();
    Some((slope, 1.0 - res / tot))
}

fn ricciflow(s: &Scenario) -> Result<Report, CliError> {
    let mut r = Report::new(s);

    // inequalities on the Yamabe-normalised family
    let mut bach = String::from("beta,M,gamma,E4,W4,ratio_E,ratio_W,Y_lower,flagged\n");
    let mut prop_ok = true;
    let mut yamabe_ok = true;
    for &beta in &s.parameters.betas {
        let y = yamabe_normalize(&warped_for_beta(s.seed, beta)?)?;
        let rep = warped_curvature(&y.metric, 2 * s.resolution);
        let (lo, hi) = yamabe_bounds(&rep)?;
        let b = bach_inequality_check(&rep, lo);
        prop_ok &= 0.5 * rep.integrals.e2 <= rep.integrals.beta;
        yamabe_ok &= lo * lo <= hi * hi;
        let _ = writeln!(
            bach,
            "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            rep.integrals.beta, b.m, b.gamma, b.e4, b.w4, b.ratio_e, b.ratio_w, b.y_lower, b.flagged
        );
    }
    r.table("bach", bach);
    r.check_bool("energy_split", prop_ok, "int |E|^2 <= 2 int |W|^2 on Yamabe metrics");
    r.check_bool("yamabe_bounds", yamabe_ok, "Y_lower^2 <= Y_upper^2");

    let floor = noise_floor(s)?;
    r.quantity("noise_floor", floor);
    let runs = flow_sweep(s, &mut r)?;
    let series: Vec<Series> = runs
        .iter()
        .map(|f| {
            Series::new(
                format!("beta = {:.2e}", f.beta),
                f.diag.samples.iter().map(|p| (p.t, p.r_dev)).collect(),
            )
        })
        .collect();
    r.figure("decay", line_plot("normalized Ricci flow", "t", "sup |R - Rbar|", &series, Scale::Log));

    let gb = runs
        .iter()
        .flat_map(|f| &f.diag.samples)
        .fold(0.0f64, |m, p| m.max((p.gauss_bonnet / GAUSS_BONNET_S4 - 1.0).abs()));
    let vol = runs
        .iter()
        .flat_map(|f| &f.diag.samples)
        .fold(0.0f64, |m, p| m.max((p.volume / VOLUME_S4 - 1.0).abs()));
    let inc = runs
        .iter()
        .fold(0.0f64, |m, f| m.max(f.diag.max_step_increase_w).max(f.diag.max_step_increase_e));
    r.check_le("gauss_bonnet", gb, 1e-3, "relative error over all flow samples");
    r.check_le("volume", vol, 1e-8, "relative volume drift along the flow");
    r.check_le("energy_monotone", inc, 1e-6, "largest per-step increase of ||W||_2 and ||E||_2");
    r.check_bool(
        "decay_gate",
        runs.iter().all(|f| f.beta < DECAY_BETA_GATE),
        format!("all betas below {DECAY_BETA_GATE:.3e}"),
    );

    let mut slopes = vec![];
    let mut tails_ok = true;
    for f in &runs {
        match tail_fit(&f.diag, floor) {
            Some((slope, r2)) => {
                tails_ok &= slope < 0.0 && r2 > 0.99;
                slopes.push(slope);
            }
            None => {
                tails_ok = false;
                slopes.push(f64::NAN);
            }
        }
    }
    r.check_bool("exponential_tail", tails_ok, format!("log-linear slopes {}", fmt_list(&slopes)));

    let ratios: Vec<f64> = runs.iter().map(|f| f.drift.ratio).collect();
    let growth = ratios.windows(2).map(|w| w[1] / w[0]).fold(1.0f64, f64::max);
    let bilip_ok = runs
        .iter()
        .all(|f| f.drift.bilip - 1.0 <= (f.drift.drift_bound - 1.0) * 1.05 + 1e-12);
    r.check_bool("bilip_within_drift", bilip_ok, "L - 1 within the drift-implied bound");
    r.check_le(
        "drift_over_gamma_beta",
        growth,
        2.0,
        format!("drift/(gamma beta) = {}; growth per step of the beta list", fmt_list(&ratios)),
    );
    Ok(r)
}

// ---------------------------------------------------------------------------

fn compose(s: &Scenario) -> Result<Report, CliError> {
    let mut r = Report::new(s);
    let qc = qc_sweep(s, &mut r)?;
    r.tables.clear();
    let mut runs = flow_sweep(s, &mut r)?;
    r.tables.clear();
    runs.sort_by(|a, b| a.beta.total_cmp(&b.beta));

    let mut csv = String::from("alpha,beta,L1,L2,L\n");
    let (mut rows, mut rhs) = (vec![], vec![]);
    for q in &qc {
        for f in &runs {
            let l = q.l * f.drift.bilip;
            let _ = writeln!(csv, "{:.6e},{:.6e},{:.12e},{:.12e},{:.12e}", q.alpha, f.beta, q.l, f.drift.bilip, l);
            rows.push([q.alpha, f.beta]);
            rhs.push(l - 1.0);
        }
    }
    r.table("compose", csv);
    let series: Vec<Series> = qc
        .iter()
        .map(|q| {
            Series::new(
                format!("alpha = {:.2e}", q.alpha),
                runs.iter().map(|f| (f.beta, q.l * f.drift.bilip - 1.0)).collect(),
            )
        })
        .collect();
    r.figure("compose", line_plot("composite bilipschitz constant", "beta", "L1 L2 - 1", &series, Scale::Log));

    // two-parameter least squares through the origin
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in rows.iter().zip(&rhs) {
        a11 += x[0] * x[0];
        a12 += x[0] * x[1];
        a22 += x[1] * x[1];
        b1 += x[0] * y;
        b2 += x[1] * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() > 0.0 {
        let c1 = (b1 * a22 - b2 * a12) / det;
        let c2 = (a11 * b2 - a12 * b1) / det;
        let resid = rows
            .iter()
            .zip(&rhs)
            .map(|(x, y)| (y - c1 * x[0] - c2 * x[1]).abs())
            .fold(0.0, f64::max);
        r.quantity("fit_c1", c1);
        r.quantity("fit_c2", c2);
        r.quantity("fit_max_residual", resid);
    }
    for f in &runs {
        r.quantity(&format!("L2_beta_{:.2e}", f.beta), f.drift.bilip);
    }
    for q in &qc {
        r.quantity(&format!("L1_alpha_{:.2e}", q.alpha), q.l);
    }
    // the composite constant lies in [max(L1, L2), L1 L2]; L1 L2 is what is reported
    let in_range = qc.iter().all(|q| {
        runs.iter().all(|f| {
            let l = q.l * f.drift.bilip;
            l.is_finite() && l >= q.l.max(f.drift.bilip)
        })
    });
    r.check_bool("composite_range", in_range, "max(L1, L2) <= L1 L2 and finite on every pair");
    let ratios: Vec<f64> = runs.iter().map(|f| f.drift.ratio).collect();
    let growth = ratios.windows(2).map(|w| w[0] / w[1]).fold(1.0f64, f64::max);
    r.check_le(
        "drift_over_gamma_beta",
        growth,
        2.0,
        format!("drift/(gamma beta) = {} by increasing beta", fmt_list(&ratios)),
    );
    Ok(r)
}

/// Runs every kind, one per worker, and returns `(kind, report)` pairs in kind order.
pub fn run_all(base: &Scenario) -> Result<Vec<(Kind, Report)>, CliError> {
    Kind::ALL
        .par_iter()
        .map(|&k| {
            let s = Scenario { kind: k, ..base.clone() };
            run(&s).map(|r| (k, r))
        })
        .collect()
}
