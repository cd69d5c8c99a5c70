//! Dispatch from a validated config to the owning library module.
//!
//! CSV columns per experiment kind:
//!
//! | kind | columns |
//! |---|---|
//! | tube | t, fraction |
//! | subset_domination | trial, n, k, scales, min_gap |
//! | partition | leaf, mass, delta, measured |
//! | deficiency | depth, leaves, max_delta, mass_deviation |
//! | width_audit | instance, facets, child, parent_width, child_width, bound, decrease_ok, bracket_ok |
//! | transport | quantity, value |
//! | logdet | instance, fd_coeff, formula_coeff, difference |
//! | waist, norm_waist, demo | t, lhs, lhs_stderr, rhs, margin |
//! | counterexample | y, t, lhs, lhs_stderr, rhs, margin |
//! | manifold_tube | t, estimate, stderr, lower, upper, verdict |
//! | hopf | t, base, base_stderr, lift, lift_stderr, agree |
//! | crofton | lines, mean_intersections, volume, model_volume, ratio |
//! | voronoi | cell, mass, stderr, low, center, high, mode_central |

use nalgebra::DMatrix;
use rand::Rng;
use serde_json::json;
use waist_core::convex::MassOracle;
use waist_core::manifold::{
    crofton_degree_probe, degree_bound_check, hopf_consistency, tube_curve, voronoi_disintegration_probe, EmbeddedManifold,
    SIGNIFICANCE as MANIFOLD_SIGNIFICANCE,
};
use waist_core::measures::{Measure, MeasureSpec};
use waist_core::pancake::{build_partition, random_direction, random_round_polytope, subspace_sequence, verify_pancake, width_check};
use waist_core::rng;
use waist_core::transport::{lipschitz_audit, logdet_expansion_check, ma_residual, solve_monotone_transport, test_points, TransportOptions};
use waist_core::tube::{radial_subspace_tube, subset_tube_gap, t_grid, TubeQuery};
use waist_core::waist::{
    counterexample_certify, end_to_end_demo, norm_neighborhood_check, waist_curve, DemoOptions, Status, TestMap, WaistCurve,
};

use crate::config::{normalized_body, Experiment, ExperimentConfig};
use crate::error::Result;
use crate::output::{vector_cell, Cell, Report};

/// Bisection tolerance of the equal-measure cuts.
const CUT_TOL: f64 = 1e-10;
/// Tolerance of the pancake audits.
const AUDIT_TOL: f64 = 1e-7;

const CURVE_COLUMNS: [&str; 5] = ["t", "lhs", "lhs_stderr", "rhs", "margin"];

/// Runs the experiment described by `config` on the current thread pool.
pub fn execute(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let seed = config.seed;
    match &config.experiment {
        Experiment::Tube { ambient, core_dim, gaussian_scales, measure } => {
            let mut r = Report::new(vec!["t", "fraction"]);
            let radial = measure.clone().map(Measure::new).transpose()?;
            for t in config.grid()? {
                let v = match &radial {
                    Some(m) => radial_subspace_tube(m, *core_dim, t)?,
                    None => TubeQuery { ambient: *ambient, core_dim: *core_dim, t, gaussian_scales: gaussian_scales.clone() }.evaluate()?,
                };
                r.push(vec![t.into(), v.into()]);
            }
            Ok(r)
        }
        Experiment::SubsetDomination { trials, max_n, max_k } => subset_domination(*trials, *max_n, *max_k, seed),
        Experiment::Partition { measure, radius, depth, k } => partition(measure, *radius, *depth, *k, seed),
        Experiment::Deficiency { measure, radius, k, depths } => deficiency(measure, *radius, *k, depths, seed),
        Experiment::WidthAudit { n, instances } => width_audit(*n, *instances, seed),
        Experiment::Transport { scales, body, resolution, force_grid, shift, residual_grid, residual_half_width } => {
            let body = normalized_body(body)?;
            let mut opts = TransportOptions { force_grid: *force_grid, shift: shift.clone(), seed, ..TransportOptions::default() };
            if let Some(res) = resolution {
                opts.resolution = *res;
            }
            let map = solve_monotone_transport(scales, &body, &opts)?;
            let audit = lipschitz_audit(&map, config.sample_count()?, seed)?;
            let mut r = Report::new(vec!["quantity", "value"]);
            r.push(vec!["solver".into(), Cell::Text(format!("{:?}", map.diagnostics.solver).to_lowercase())]);
            for (i, c) in map.center().iter().enumerate() {
                r.push(vec![Cell::Text(format!("center_{i}")), (*c).into()]);
            }
            r.push(vec!["discrepancy".into(), map.diagnostics.discrepancy.into()]);
            r.push(vec!["iterations".into(), map.diagnostics.iterations.into()]);
            r.push(vec!["pairs".into(), audit.pairs.into()]);
            r.push(vec!["lipschitz_max_ratio".into(), audit.max_ratio.into()]);
            r.push(vec!["min_monotone".into(), audit.min_monotone.into()]);
            let mut summary = json!({ "center": map.center(), "diagnostics": map.diagnostics, "lipschitz": audit });
            if *residual_grid > 0 {
                let resid = ma_residual(&map, &test_points(body.dim, *residual_half_width, *residual_grid))?;
                r.push(vec!["ma_residual_mean".into(), resid.mean_abs.into()]);
                r.push(vec!["ma_residual_max".into(), resid.max_abs.into()]);
                r.push(vec!["ma_residual_points".into(), resid.used.into()]);
                summary["ma_residual"] = json!(resid);
            }
            r.summary = summary;
            Ok(r)
        }
        Experiment::Logdet { dim, instances } => logdet(*dim, *instances, seed),
        Experiment::Waist { measure, map, y } => {
            let f = TestMap::new(map.clone())?;
            let c = waist_curve(measure, &f, y, &config.grid()?, config.sample_count()?, seed)?;
            Ok(curve_report(&c))
        }
        Experiment::NormWaist { body, body_measure, map } => {
            let f = TestMap::new(map.clone())?;
            let body = normalized_body(body)?;
            let c = norm_neighborhood_check(&body, body_measure, &f, &config.grid()?, config.sample_count()?, seed)?;
            Ok(curve_report(&c))
        }
        Experiment::Counterexample { measure, map, candidates } => {
            let f = TestMap::new(map.clone())?;
            let v = counterexample_certify(measure, &f, &config.grid()?, candidates, config.sample_count()?, seed)?;
            let mut r = Report::new(vec!["y", "t", "lhs", "lhs_stderr", "rhs", "margin"]);
            for c in &v.curves {
                for i in 0..c.t.len() {
                    r.push(vec![vector_cell(&c.y), c.t[i].into(), c.lhs[i].into(), c.lhs_stderr[i].into(), c.rhs[i].into(), c.margin[i].into()]);
                }
            }
            let witnesses: Vec<_> = v
                .witnesses
                .iter()
                .map(|w| {
                    json!({
                        "y": w.y,
                        "t": w.t,
                        "margin": w.margin,
                        "stderr": w.stderr,
                        "sigmas": w.sigmas,
                        "closed_form_margin": w.closed_form_margin,
                        "shortfall": -w.closed_form_margin.unwrap_or(w.margin),
                    })
                })
                .collect();
            r.summary = json!({ "verdict": v.status, "witnesses": witnesses, "margin_sigmas": v.margin_sigmas, "map": f.name });
            r.inconclusive = v.status == Status::Inconclusive;
            Ok(r)
        }
        Experiment::ManifoldTube { manifold, degree } => {
            let m = EmbeddedManifold::new(manifold.clone(), seed)?;
            let grid = config.grid()?;
            let count = config.sample_count()?;
            let mut r = Report::new(vec!["t", "estimate", "stderr", "lower", "upper", "verdict"]);
            let mut statuses = Vec::new();
            match degree {
                Some(d) => {
                    for c in degree_bound_check(&m, *d, &grid, count, seed)? {
                        let e = &c.estimate;
                        r.push(vec![e.t.into(), e.estimate.into(), e.stderr.into(), e.lower.into(), e.upper.into(), status_cell(c.status)]);
                        statuses.push(c.status);
                    }
                }
                None => {
                    for e in tube_curve(&m, &grid, count, seed)? {
                        let status = if e.failure_fraction > waist_core::manifold::FAILURE_LIMIT {
                            Status::Inconclusive
                        } else if e.estimate + MANIFOLD_SIGNIFICANCE * e.stderr >= e.lower {
                            Status::Satisfied
                        } else {
                            Status::Violated
                        };
                        r.push(vec![e.t.into(), e.estimate.into(), e.stderr.into(), e.lower.into(), e.upper.into(), status_cell(status)]);
                        statuses.push(status);
                    }
                }
            }
            r.inconclusive = statuses.contains(&Status::Inconclusive);
            r.summary = json!({ "method": m.method, "dimension": m.dim, "degree": m.degree, "statuses": statuses });
            Ok(r)
        }
        Experiment::Hopf { base } => {
            let m = EmbeddedManifold::new(base.clone(), seed)?;
            let rows = hopf_consistency(&m, &config.grid()?, config.sample_count()?, seed)?;
            let mut r = Report::new(vec!["t", "base", "base_stderr", "lift", "lift_stderr", "agree"]);
            for h in &rows {
                r.push(vec![h.t.into(), h.base.estimate.into(), h.base.stderr.into(), h.lift.estimate.into(), h.lift.stderr.into(), h.agree.into()]);
            }
            r.summary = json!({ "all_agree": rows.iter().all(|h| h.agree) });
            Ok(r)
        }
        Experiment::Crofton { manifold, lines } => {
            let m = EmbeddedManifold::new(manifold.clone(), seed)?;
            let c = crofton_degree_probe(&m, *lines, seed)?;
            let mut r = Report::new(vec!["lines", "mean_intersections", "volume", "model_volume", "ratio"]);
            r.push(vec![c.lines.into(), c.mean_intersections.into(), c.volume.into(), c.model_volume.into(), c.ratio.into()]);
            r.summary = json!({ "degree": m.degree, "estimated_degree": c.mean_intersections });
            Ok(r)
        }
        Experiment::Voronoi { manifold, sites } => {
            let m = EmbeddedManifold::new(manifold.clone(), seed)?;
            let v = voronoi_disintegration_probe(&m, *sites, config.sample_count()?, seed)?;
            let mut r = Report::new(vec!["cell", "mass", "stderr", "low", "center", "high", "mode_central"]);
            for i in 0..v.cell_mass.len() {
                let h = &v.histograms[i];
                r.push(vec![
                    i.into(),
                    v.cell_mass[i].into(),
                    v.cell_stderr[i].into(),
                    h[0].into(),
                    h[1].into(),
                    h[2].into(),
                    v.mode_central[i].into(),
                ]);
            }
            r.summary = json!({ "all_central": v.all_central, "volume_critical": v.volume_critical, "bin_centers": v.bin_centers });
            Ok(r)
        }
        Experiment::Demo { scales, map, depth, radius, resolution, tv_samples } => {
            let f = TestMap::new(map.clone())?;
            let mut opts = DemoOptions { count: config.sample_count()?, seed, ..DemoOptions::default() };
            if let Some(res) = resolution {
                opts.transport.resolution = *res;
            }
            if let Some(s) = tv_samples {
                opts.transport.tv_samples = *s;
            }
            let d = end_to_end_demo(scales, &f, *depth, *radius, &config.grid()?, &opts)?;
            let mut r = curve_report(&d.curve);
            r.inconclusive = !d.converged;
            r.summary = json!({
                "y_found": d.y_found,
                "spread": d.spread,
                "converged": d.converged,
                "leaf_values": d.leaf_values,
                "leaf_masses": d.leaf_masses,
                "leaf_deltas": d.leaf_deltas,
                "pancake_eps": d.pancake_eps,
                "pancake_bound": d.pancake_bound,
                "pancake_ok": d.pancake_ok,
                "evaluations": d.evaluations,
                "curve_holds": d.curve.holds(),
            });
            Ok(r)
        }
    }
}

fn status_cell(s: Status) -> Cell {
    Cell::Text(serde_json::to_value(s).expect("status serializes").as_str().unwrap_or_default().to_string())
}

fn curve_report(c: &WaistCurve) -> Report {
    let mut r = Report::new(CURVE_COLUMNS.to_vec());
    for i in 0..c.t.len() {
        r.push(vec![c.t[i].into(), c.lhs[i].into(), c.lhs_stderr[i].into(), c.rhs[i].into(), c.margin[i].into()]);
    }
    r.summary = json!({
        "y": c.y,
        "method": c.method,
        "failure_fraction": c.failure_fraction,
        "flagged": c.flagged,
        "worst_sigmas": finite_or_null(c.worst_sigmas()),
        "holds": c.holds(),
    });
    r.inconclusive = c.flagged;
    r
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

/// Tube radii for the domination sweep.
fn domination_grid() -> Vec<f64> {
    t_grid(0.1, 3.0, 16)
}

fn subset_domination(trials: usize, max_n: usize, max_k: usize, seed: u64) -> Result<Report> {
    let mut rng = rng::aux_stream(seed, 0x5d);
    let mut r = Report::new(vec!["trial", "n", "k", "scales", "min_gap"]);
    let mut worst = f64::INFINITY;
    for trial in 0..trials {
        let n = rng.random_range(2..=max_n);
        let k = rng.random_range(1..=max_k.min(n));
        let mut scales: Vec<f64> = (0..n).map(|_| 0.05 + 3.0 * rng.random::<f64>()).collect();
        scales.sort_by(f64::total_cmp);
        let mut gap = f64::INFINITY;
        for t in domination_grid() {
            gap = gap.min(subset_tube_gap(&scales, k, t)?);
        }
        worst = worst.min(gap);
        r.push(vec![trial.into(), n.into(), k.into(), vector_cell(&scales), gap.into()]);
    }
    r.summary = json!({ "min_gap": worst, "radii": domination_grid().len(), "exceptions": r.numbers("min_gap").iter().filter(|g| **g < 0.0).count() });
    Ok(r)
}

fn oracle(measure: &MeasureSpec, seed: u64) -> Result<MassOracle> {
    Ok(MassOracle::new(Measure::new(measure.clone())?, seed)?)
}

fn directions(n: usize, depth: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..(1usize << depth) - 1).map(|j| random_direction(n, seed, j as u64)).collect()
}

fn partition(measure: &MeasureSpec, radius: f64, depth: usize, k: usize, seed: u64) -> Result<Report> {
    let n = measure.dim;
    let o = oracle(measure, seed)?;
    let p = build_partition(&o, radius, depth, &directions(n, depth, seed), CUT_TOL)?;
    let frames = subspace_sequence(n, k, depth, seed)?;
    let audit = verify_pancake(&o, &p, k, &frames, AUDIT_TOL)?;
    let mut r = Report::new(vec!["leaf", "mass", "delta", "measured"]);
    for (i, (m, (delta, measured))) in p.masses.iter().zip(&audit.leaves).enumerate() {
        r.push(vec![i.into(), (*m).into(), (*delta).into(), (*measured).into()]);
    }
    r.summary = json!({
        "mass_deviation": p.mass_deviation(),
        "max_delta": audit.max_delta,
        "widths_ok": audit.widths_ok(),
        "volumes_ok": audit.volumes.iter().all(|v| v.ok),
    });
    Ok(r)
}

fn deficiency(measure: &MeasureSpec, radius: f64, k: usize, depths: &[usize], seed: u64) -> Result<Report> {
    let n = measure.dim;
    let o = oracle(measure, seed)?;
    let deepest = *depths.iter().max().unwrap_or(&1);
    let frames = subspace_sequence(n, k, deepest, seed)?;
    let mut r = Report::new(vec!["depth", "leaves", "max_delta", "mass_deviation"]);
    for &depth in depths {
        let p = build_partition(&o, radius, depth, &directions(n, depth, seed), CUT_TOL)?;
        let audit = verify_pancake(&o, &p, k, &frames, AUDIT_TOL)?;
        r.push(vec![depth.into(), p.masses.len().into(), audit.max_delta.into(), p.mass_deviation().into()]);
    }
    let deltas = r.numbers("max_delta");
    r.summary = json!({ "decreasing": deltas.windows(2).all(|w| w[1] < w[0]) });
    Ok(r)
}

fn width_audit(n: usize, instances: usize, seed: u64) -> Result<Report> {
    let o = oracle(&MeasureSpec::uniform_ball(n, 1.0), seed)?;
    let mut r = Report::new(vec!["instance", "facets", "child", "parent_width", "child_width", "bound", "decrease_ok", "bracket_ok"]);
    let mut all_ok = true;
    for i in 0..instances as u64 {
        let facets = n + 1 + (i as usize % 6);
        let body = random_round_polytope(n, facets, seed, i)?;
        let u = random_direction(n, seed.wrapping_add(1), i);
        for w in width_check(&o, &body, &u, 1.0, 1e-8)? {
            all_ok &= w.decrease_ok && w.bracket_ok;
            r.push(vec![
                (i as usize).into(),
                facets.into(),
                w.child.into(),
                w.parent_width.into(),
                w.child_width.into(),
                w.bound.into(),
                w.decrease_ok.into(),
                w.bracket_ok.into(),
            ]);
        }
    }
    r.summary = json!({ "all_ok": all_ok });
    Ok(r)
}

fn logdet(dim: usize, instances: usize, seed: u64) -> Result<Report> {
    let mut rng = rng::aux_stream(seed, 0x3d);
    let mut r = Report::new(vec!["instance", "fd_coeff", "formula_coeff", "difference"]);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mut m = || DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let g = m();
        let d0 = &g * g.transpose() + DMatrix::identity(dim, dim);
        let (d1, d2) = (m(), m());
        let c = logdet_expansion_check(&d0, &d1, &d2)?;
        let diff = (c.fd_coeff - c.formula_coeff).abs();
        worst = worst.max(diff);
        r.push(vec![i.into(), c.fd_coeff.into(), c.formula_coeff.into(), diff.into()]);
    }
    r.summary = json!({ "max_difference": worst });
    Ok(r)
}
