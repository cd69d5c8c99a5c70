//! Monte Carlo waist experiments: fiber tube measures, waist curves against
//! model tubes, counterexample certificates, odd-map and norm-neighborhood
//! checks, and the end-to-end pancake demonstration.

pub mod maps;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::convex::{pancake_deficiency, ConvexBody, MassOracle};
use crate::error::{invalid, Error, Result};
use crate::measures::{Measure, MeasureKind, MeasureSpec};
use crate::pancake::{equalize_f, subspace_sequence, EqualizeOptions};
use crate::rng;
use crate::transport::{pancake_parameter_bound, solve_monotone_transport, TransportOptions};
use crate::tube::{gaussian_subspace_tube, radial_subspace_tube, spherical_tube_fraction};

pub use maps::{builtin_maps, homogeneity_defect, oddness_defect, Domain, FiberMethod, MapSpec, TestMap};

/// Significance threshold for a violation, in standard errors.
pub const SIGNIFICANCE: f64 = 3.0;
/// Largest tolerated fraction of failed distance searches.
pub const FAILURE_LIMIT: f64 = 1e-3;
/// Slack below which a zero-variance margin still counts as equality.
const EXACT_SLACK: f64 = 1e-9;

/// One Monte Carlo tube estimate.
#[derive(Clone, Debug, Serialize)]
pub struct TubeSample {
    pub estimate: f64,
    pub stderr: f64,
    pub failure_fraction: f64,
    /// More than `FAILURE_LIMIT` of the searches failed.
    pub flagged: bool,
}

/// Tube measures of one fiber over a grid of radii, with the model tube.
#[derive(Clone, Debug, Serialize)]
pub struct WaistCurve {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub lhs: Vec<f64>,
    pub lhs_stderr: Vec<f64>,
    pub rhs: Vec<f64>,
    pub margin: Vec<f64>,
    pub method: FiberMethod,
    pub failure_fraction: f64,
    pub flagged: bool,
}

impl WaistCurve {
    /// Smallest margin measured in standard errors; margins with zero
    /// standard error count as `±∞` by sign unless within rounding.
    pub fn worst_sigmas(&self) -> f64 {
        self.margin
            .iter()
            .zip(&self.lhs_stderr)
            .map(|(m, s)| {
                if *s > 0.0 {
                    m / s
                } else if *m < -EXACT_SLACK {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Every margin is at least `-SIGNIFICANCE` standard errors.
    pub fn holds(&self) -> bool {
        self.worst_sigmas() >= -SIGNIFICANCE
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("radii must be finite and nonnegative"));
    }
    Ok(())
}

fn check_pair(spec: &MeasureSpec, f: &TestMap, y: &[f64]) -> Result<()> {
    if spec.dim != f.n {
        return Err(invalid(format!("map {} acts on R^{} but the measure lives in R^{}", f.name, f.n, spec.dim)));
    }
    if y.len() != f.k || y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("fiber value must be a finite vector of the target dimension"));
    }
    if let Domain::Sphere(r) = f.domain {
        match spec.kind {
            MeasureKind::UniformSphere { radius } if (radius - r).abs() <= 1e-12 * r => {}
            _ => return Err(invalid("sphere maps need the uniform measure on the same sphere")),
        }
    }
    Ok(())
}

/// Model tube for `f`: a great subsphere for sphere maps, the coordinate
/// subspace along the widest directions for Gaussians, a linear subspace for
/// rotation-invariant measures.
pub fn model_tube(measure: &Measure, f: &TestMap, t: f64) -> Result<f64> {
    let spec = measure.spec();
    match f.domain {
        Domain::Sphere(r) => spherical_tube_fraction(f.n - 1, f.n - 1 - f.k, t / r),
        Domain::Euclidean => match &spec.kind {
            MeasureKind::GaussianAniso { scales } => {
                let mut s = scales.clone();
                s.sort_by(f64::total_cmp);
                gaussian_subspace_tube(&s[..f.k], t)
            }
            _ => radial_subspace_tube(measure, f.n - f.k, t),
        },
    }
}

fn scores(measure: &Measure, f: &TestMap, y: &[f64], count: usize, seed: u64) -> crate::measures::Scored {
    measure.score(count, seed, |x| f.fiber_distance(x, y))
}

pub fn fiber_tube_measure(spec: &MeasureSpec, f: &TestMap, y: &[f64], t: f64, count: usize, seed: u64) -> Result<TubeSample> {
    check_pair(spec, f, y)?;
    check_grid(&[t])?;
    if count == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let measure = Measure::new(spec.clone())?;
    let s = scores(&measure, f, y, count, seed);
    let (estimate, stderr) = s.fraction_at_most(t);
    let failure_fraction = s.failure_fraction();
    Ok(TubeSample { estimate, stderr, failure_fraction, flagged: failure_fraction > FAILURE_LIMIT })
}

pub fn waist_curve(spec: &MeasureSpec, f: &TestMap, y: &[f64], t_grid: &[f64], count: usize, seed: u64) -> Result<WaistCurve> {
    check_pair(spec, f, y)?;
    check_grid(t_grid)?;
    if count == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let measure = Measure::new(spec.clone())?;
    let s = scores(&measure, f, y, count, seed);
    let mut curve = WaistCurve {
        y: y.to_vec(),
        t: t_grid.to_vec(),
        lhs: Vec::new(),
        lhs_stderr: Vec::new(),
        rhs: Vec::new(),
        margin: Vec::new(),
        method: f.method(y),
        failure_fraction: s.failure_fraction(),
        flagged: s.failure_fraction() > FAILURE_LIMIT,
    };
    for &t in t_grid {
        let (lhs, se) = s.fraction_at_most(t);
        let rhs = model_tube(&measure, f, t)?;
        curve.lhs.push(lhs);
        curve.lhs_stderr.push(se);
        curve.rhs.push(rhs);
        curve.margin.push(lhs - rhs);
    }
    Ok(curve)
}

/// Exact tube measure where the fiber and measure admit one.
pub fn closed_form_lhs(spec: &MeasureSpec, f: &TestMap, y: &[f64], t: f64) -> Result<Option<f64>> {
    let zero = y.iter().all(|v| *v == 0.0);
    Ok(match (&spec.kind, &f.spec) {
        (MeasureKind::AtomSphereMix { atom_mass, radius }, MapSpec::Radius { .. }) => {
            let y = y[0];
            if y < 0.0 {
                Some(0.0)
            } else {
                let atom = if y <= t { *atom_mass } else { 0.0 };
                let shell = if (radius - y).abs() <= t { 1.0 - atom_mass } else { 0.0 };
                Some(atom + shell)
            }
        }
        (MeasureKind::UniformSphere { radius }, MapSpec::Coordinates { sphere_radius: Some(_), .. }) if zero => {
            Some(spherical_tube_fraction(f.n - 1, f.n - 1 - f.k, t / radius)?)
        }
        (MeasureKind::GaussianAniso { scales }, MapSpec::Coordinates { indices, sphere_radius: None, .. }) if zero => {
            let s: Vec<f64> = indices.iter().map(|i| scales[*i]).collect();
            Some(gaussian_subspace_tube(&s, t)?)
        }
        _ => None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
    Inconclusive,
}

/// A fiber value with a radius at which its tube falls short of the model.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub y: Vec<f64>,
    pub t: f64,
    pub margin: f64,
    pub stderr: f64,
    /// `−margin / stderr`; absent when the estimate has zero variance.
    pub sigmas: Option<f64>,
    /// Exact `lhs − rhs` when the tube measure has a closed form.
    pub closed_form_margin: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub witnesses: Vec<Witness>,
    /// Weakest witness significance in standard errors; absent when every
    /// witness is exact.
    pub margin_sigmas: Option<f64>,
    pub curves: Vec<WaistCurve>,
}

/// Tests whether every candidate fiber falls short of the model tube at
/// some radius. Violations need closed-form distances; a shortfall found
/// only through searched distances makes the verdict inconclusive.
pub fn counterexample_certify(
    spec: &MeasureSpec,
    f: &TestMap,
    t_grid: &[f64],
    y_candidates: &[Vec<f64>],
    count: usize,
    seed: u64,
) -> Result<Verdict> {
    if y_candidates.is_empty() {
        return Err(invalid("need at least one candidate fiber value"));
    }
    let mut witnesses = Vec::new();
    let mut curves = Vec::new();
    let (mut all_violated, mut any_clean, mut suspect) = (true, false, false);
    for y in y_candidates {
        let curve = waist_curve(spec, f, y, t_grid, count, seed)?;
        let mut found = None;
        for (i, &t) in t_grid.iter().enumerate() {
            let closed = closed_form_lhs(spec, f, y, t)?.map(|l| l - curve.rhs[i]);
            let (m, se) = (curve.margin[i], curve.lhs_stderr[i]);
            let significant = match closed {
                Some(c) => c < -EXACT_SLACK,
                None => m < -SIGNIFICANCE * se - EXACT_SLACK,
            };
            if significant {
                found = Some(Witness {
                    y: y.clone(),
                    t,
                    margin: m,
                    stderr: se,
                    sigmas: (se > 0.0).then(|| -m / se),
                    closed_form_margin: closed,
                });
                break;
            }
        }
        suspect |= curve.flagged;
        match found {
            Some(w) if curve.method == FiberMethod::Analytic => witnesses.push(w),
            Some(_) => {
                all_violated = false;
                suspect = true;
            }
            None => {
                all_violated = false;
                any_clean = true;
            }
        }
        curves.push(curve);
    }
    let status = if suspect {
        Status::Inconclusive
    } else if all_violated {
        Status::Violated
    } else if any_clean {
        Status::Satisfied
    } else {
        Status::Inconclusive
    };
    let margin_sigmas = witnesses.iter().filter_map(|w| w.sigmas).reduce(f64::min);
    Ok(Verdict { status, witnesses, margin_sigmas, curves })
}

/// Measure on a convex body for the norm-neighborhood check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodyMeasure {
    Uniform,
    /// Density proportional to `exp(−Σ a_i x_i²)` restricted to the body.
    Gaussian { scales: Vec<f64> },
}

fn is_centrally_symmetric(body: &ConvexBody) -> Result<bool> {
    for h in &body.halfspaces {
        let neg: Vec<f64> = h.normal.iter().map(|v| -v).collect();
        let (a, b) = (body.support(&h.normal)?, body.support(&neg)?);
        if (a - b).abs() > 1e-8 * (1.0 + a.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn body_points(body: &ConvexBody, measure: &BodyMeasure, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    match measure {
        BodyMeasure::Uniform => body.sample_uniform(count, seed),
        BodyMeasure::Gaussian { scales } => {
            if scales.len() != body.dim || scales.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(invalid("one positive Gaussian scale per coordinate"));
            }
            let oracle = MassOracle::new(Measure::new(MeasureSpec::gaussian(scales.clone()))?, seed)?;
            if oracle.mass(body)? < 1e-6 {
                return Err(Error::Degenerate("body has negligible Gaussian mass".into()));
            }
            let chunks = rng::chunked(count, seed, |r, len| {
                let mut out = Vec::with_capacity(len);
                let mut p = vec![0.0; body.dim];
                while out.len() < len {
                    for (v, a) in p.iter_mut().zip(scales) {
                        *v = r.sample::<f64, _>(StandardNormal) / (2.0 * a).sqrt();
                    }
                    if body.contains(&p, 0.0) {
                        out.push(p.clone());
                    }
                }
                out
            });
            Ok(chunks.concat())
        }
    }
}

/// Fraction of the body measure within gauge distance `t` of the zero fiber
/// of an odd map, against `t^k` for a map to `R^k`. The gauge distance is
/// taken to the Euclidean nearest fiber point, an upper bound.
pub fn norm_neighborhood_check(body: &ConvexBody, measure: &BodyMeasure, f: &TestMap, t_grid: &[f64], count: usize, seed: u64) -> Result<WaistCurve> {
    check_grid(t_grid)?;
    if t_grid.iter().any(|t| *t > 1.0) {
        return Err(invalid("norm-neighborhood radii lie in [0, 1]"));
    }
    if body.dim != f.n || f.domain != Domain::Euclidean {
        return Err(invalid("map must act on the body's ambient space"));
    }
    if !f.odd {
        return Err(invalid("norm-neighborhood check needs an odd map"));
    }
    if !is_centrally_symmetric(body)? {
        return Err(invalid("body must be centrally symmetric"));
    }
    if let BodyMeasure::Gaussian { scales } = measure {
        if scales.len() != f.n {
            return Err(invalid("one Gaussian scale per coordinate"));
        }
    }
    let points = body_points(body, measure, count, seed)?;
    let y = vec![0.0; f.k];
    let dist: Vec<f64> = points
        .iter()
        .map(|x| match f.nearest_fiber_point(x, &y) {
            Some(z) => {
                let d: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
                body.gauge(&d).unwrap_or(f64::NAN)
            }
            None => f64::NAN,
        })
        .collect();
    let failures = dist.iter().filter(|d| d.is_nan()).count() as f64 / dist.len() as f64;
    let total = dist.len() as f64;
    let mut curve = WaistCurve {
        y,
        t: t_grid.to_vec(),
        lhs: Vec::new(),
        lhs_stderr: Vec::new(),
        rhs: Vec::new(),
        margin: Vec::new(),
        method: f.method(&vec![0.0; f.k]),
        failure_fraction: failures,
        flagged: failures > FAILURE_LIMIT,
    };
    for &t in t_grid {
        let p = dist.iter().filter(|d| **d <= t).count() as f64 / total;
        let rhs = t.powi(f.k as i32);
        curve.lhs.push(p);
        curve.lhs_stderr.push((p * (1.0 - p) / total).sqrt());
        curve.rhs.push(rhs);
        curve.margin.push(p - rhs);
    }
    Ok(curve)
}

#[derive(Clone, Debug)]
pub struct DemoOptions {
    pub transport: TransportOptions,
    pub equalize: EqualizeOptions,
    /// Samples for the final waist curve.
    pub count: usize,
    pub seed: u64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            transport: TransportOptions { resolution: 64, tv_samples: 1 << 15, ..TransportOptions::default() },
            equalize: EqualizeOptions::default(),
            count: 1_000_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    /// Common value of `f` at the part centers.
    pub y_found: Vec<f64>,
    pub spread: f64,
    pub converged: bool,
    pub leaf_values: Vec<f64>,
    pub leaf_masses: Vec<f64>,
    /// Uncached transport solves used by the equalization.
    pub evaluations: usize,
    /// John-ellipsoid closeness of each part to a line.
    pub leaf_deltas: Vec<f64>,
    /// Smallest positive radius of the grid.
    pub pancake_eps: f64,
    pub pancake_bound: f64,
    /// Every part is within the bound for `pancake_eps`.
    pub pancake_ok: bool,
    pub curve: WaistCurve,
}

/// Partitions the Gaussian ball of radius `radius` into `2^depth` parts of
/// equal measure on which `f` takes the same value at the transport center,
/// then measures the tube of the fiber through that value.
pub fn end_to_end_demo(scales: &[f64], f: &TestMap, depth: usize, radius: f64, t_grid: &[f64], opts: &DemoOptions) -> Result<DemoReport> {
    let n = scales.len();
    if n > 3 || f.n != n || f.k != 1 || f.domain != Domain::Euclidean {
        return Err(invalid("demo needs n <= 3 and a real-valued map on R^n"));
    }
    if depth > 4 {
        return Err(invalid("demo supports at most 16 parts"));
    }
    check_grid(t_grid)?;
    let spec = MeasureSpec::gaussian(scales.to_vec());
    let oracle = MassOracle::new(Measure::new(spec.clone())?, opts.seed)?;
    let frames = subspace_sequence(n, 1, depth, opts.seed)?;
    let topts = opts.transport.clone();
    let functional = move |body: &ConvexBody| -> Result<Vec<f64>> {
        // Thin or far pieces can miss the discrepancy target on the coarse
        // grid; one refinement settles them.
        let map = match solve_monotone_transport(scales, body, &topts) {
            Err(Error::NotConverged { .. }) => {
                let fine = TransportOptions { resolution: 2 * topts.resolution, tv_samples: 2 * topts.tv_samples, ..topts.clone() };
                solve_monotone_transport(scales, body, &fine)?
            }
            other => other?,
        };
        Ok(f.evaluate(&map.center()))
    };
    let eq = equalize_f(&oracle, radius, &functional, 1, depth, &frames, opts.seed, opts.equalize)?;
    let leaf_values: Vec<f64> = eq.result.f_values.iter().map(|v| v[0]).collect();
    let y = leaf_values.iter().sum::<f64>() / leaf_values.len() as f64;
    let leaf_deltas = eq.result.leaves().iter().map(|b| pancake_deficiency(b, 1).map(|d| d.delta)).collect::<Result<Vec<_>>>()?;
    let pancake_eps = t_grid.iter().cloned().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    let pancake_bound = pancake_parameter_bound(pancake_eps, radius);
    let curve = waist_curve(&spec, f, &[y], t_grid, opts.count, opts.seed)?;
    Ok(DemoReport {
        y_found: vec![y],
        spread: eq.spread,
        converged: eq.converged,
        leaf_values,
        leaf_masses: eq.result.masses.clone(),
        evaluations: eq.evaluations,
        pancake_ok: leaf_deltas.iter().all(|d| *d < pancake_bound),
        leaf_deltas,
        pancake_eps,
        pancake_bound,
        curve,
    })
}
