//! Monte Carlo tube volumes of submanifolds of `S^n` and `CP^n`.
//!
//! Sphere submanifolds come with explicit charts and closed-form distances.
//! Projective submanifolds are hypersurfaces `{P = 0}` searched in the lift
//! to `S^{2n+1}`. Distances are upper bounds, so tube fractions computed
//! from them are lower bounds on the true fractions.

mod variety;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::optimize::nelder_mead;
use crate::rng;
use crate::tube::{cp_tube_fraction, spherical_tube_fraction, Ambient};
use crate::waist::Status;

pub use variety::{fubini_study, rotate_phase, Polynomial, Term, Variety, VARIETY_STARTS};

/// Convergence failures tolerated before an upper-bound check is inconclusive.
pub const FAILURE_LIMIT: f64 = 1e-3;
/// Standard errors allowed on either side of a model bound.
pub const SIGNIFICANCE: f64 = 3.0;
/// Minimum samples per Voronoi cell inside the probed band.
pub const MIN_CELL_SAMPLES: usize = 1000;
/// Half width of the normal band used by the Voronoi probe.
const BAND: f64 = 0.9;
/// Histogram bins across the band; the middle one is centered at 0.
const BAND_BINS: usize = 3;
/// Starts for chart searches.
const CHART_STARTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    /// The great `S^k` in the first `k + 1` coordinates of `S^n`.
    GreatSphere { n: usize, k: usize },
    /// The circle of points at polar angle `colatitude` from `e_3` in `S^2`.
    LatitudeCircle { colatitude: f64 },
    /// `{|z_1| = |z_2|}` in the unit sphere `S^3` of `C^2`.
    CliffordTorus,
    /// `CP^n` itself when `polynomial` is absent, else `{P = 0}`.
    Projective {
        n: usize,
        #[serde(default)]
        polynomial: Option<Polynomial>,
    },
    /// Preimage of a projective manifold under the Hopf map.
    HopfLift { base: Box<ManifoldSpec> },
}

impl ManifoldSpec {
    /// The line `{z_1 = 0}` in `CP^2`.
    pub fn line() -> Self {
        ManifoldSpec::Projective { n: 2, polynomial: Some(Polynomial::coordinate(2, 1)) }
    }

    pub fn conic() -> Self {
        ManifoldSpec::Projective { n: 2, polynomial: Some(Polynomial::conic()) }
    }

    pub fn fermat(degree: u32) -> Self {
        ManifoldSpec::Projective { n: 2, polynomial: Some(Polynomial::fermat(degree)) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    /// Closed form.
    Analytic,
    /// Multi-start search over the variety in the sphere lift.
    VarietySearch,
}

#[derive(Clone, Debug)]
enum Repr {
    Chart(Chart),
    Whole,
    Variety(Box<Variety>),
}

#[derive(Clone, Copy, Debug)]
enum Chart {
    GreatSphere { n: usize, k: usize },
    Latitude { colatitude: f64 },
    Clifford,
}

impl Chart {
    fn params(&self) -> usize {
        match self {
            Chart::GreatSphere { k, .. } => *k,
            Chart::Latitude { .. } => 1,
            Chart::Clifford => 2,
        }
    }

    /// Chart map from the parameter box onto the manifold.
    fn point(&self, u: &[f64]) -> Vec<f64> {
        match *self {
            Chart::GreatSphere { n, k } => {
                // hyperspherical coordinates on S^k
                let mut p = vec![0.0; n + 1];
                let mut sin_prod = 1.0;
                for i in 0..k {
                    p[i] = sin_prod * u[i].cos();
                    sin_prod *= u[i].sin();
                }
                p[k] = sin_prod;
                p
            }
            Chart::Latitude { colatitude } => {
                let s = colatitude.sin();
                vec![s * u[0].cos(), s * u[0].sin(), colatitude.cos()]
            }
            Chart::Clifford => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                vec![h * u[0].cos(), h * u[0].sin(), h * u[1].cos(), h * u[1].sin()]
            }
        }
    }

    /// Signed geodesic displacement from the manifold, for hypersurfaces.
    fn displacement(&self, x: &[f64]) -> Option<f64> {
        match *self {
            Chart::GreatSphere { n, k } if k + 1 == n => {
                let head = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                Some(x[n].atan2(head))
            }
            Chart::GreatSphere { .. } => None,
            Chart::Latitude { colatitude } => Some(x[0].hypot(x[1]).atan2(x[2]) - colatitude),
            Chart::Clifford => Some(x[2].hypot(x[3]).atan2(x[0].hypot(x[1])) - FRAC_PI_4),
        }
    }

    fn distance(&self, x: &[f64]) -> f64 {
        match *self {
            Chart::GreatSphere { k, .. } => {
                let head = x[..=k].iter().map(|v| v * v).sum::<f64>().sqrt();
                let tail = x[k + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                tail.atan2(head)
            }
            _ => self.displacement(x).map_or(f64::NAN, f64::abs),
        }
    }
}

/// A closed submanifold of a sphere or of complex projective space.
#[derive(Clone, Debug)]
pub struct EmbeddedManifold {
    pub spec: ManifoldSpec,
    pub ambient: Ambient,
    /// Real dimension in a sphere, complex dimension in `CP^n`.
    pub dim: usize,
    pub degree: Option<u32>,
    pub method: DistanceMethod,
    /// Declared volume-critical (minimal) instance.
    pub volume_critical: bool,
    repr: Repr,
}

fn unit_vector(len: usize, rng: &mut rng::Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if s > 1e-12 {
            return v.into_iter().map(|a| a / s).collect();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl EmbeddedManifold {
    /// Builds the manifold; `seed` fixes the point cloud of a variety.
    pub fn new(spec: ManifoldSpec, seed: u64) -> Result<Self> {
        let (ambient, dim, degree, repr, critical) = match &spec {
            ManifoldSpec::GreatSphere { n, k } => {
                if *k >= *n || *k == 0 {
                    return Err(invalid("need 1 <= k < n for a great subsphere"));
                }
                (Ambient::Sphere(*n), *k, None, Repr::Chart(Chart::GreatSphere { n: *n, k: *k }), true)
            }
            ManifoldSpec::LatitudeCircle { colatitude } => {
                if !(*colatitude > 0.0 && *colatitude < PI) {
                    return Err(invalid("colatitude must lie in (0, pi)"));
                }
                let critical = *colatitude == FRAC_PI_2;
                (Ambient::Sphere(2), 1, None, Repr::Chart(Chart::Latitude { colatitude: *colatitude }), critical)
            }
            ManifoldSpec::CliffordTorus => (Ambient::Sphere(3), 2, None, Repr::Chart(Chart::Clifford), true),
            ManifoldSpec::Projective { n, polynomial } => match polynomial {
                None => (Ambient::ComplexProjective(*n), *n, Some(1), Repr::Whole, true),
                Some(p) => {
                    let v = Variety::new(*n, p.clone(), seed)?;
                    (Ambient::ComplexProjective(*n), n - 1, Some(v.degree), Repr::Variety(Box::new(v)), true)
                }
            },
            ManifoldSpec::HopfLift { base } => {
                let b = EmbeddedManifold::new((**base).clone(), seed)?;
                let Ambient::ComplexProjective(n) = b.ambient else {
                    return Err(invalid("the Hopf lift needs a projective base"));
                };
                (Ambient::Sphere(2 * n + 1), 2 * b.dim + 1, b.degree, b.repr, true)
            }
        };
        if let Ambient::Sphere(0) | Ambient::ComplexProjective(0) = ambient {
            return Err(invalid("ambient dimension must be positive"));
        }
        let method = match &repr {
            Repr::Variety(v) if v.degree > 1 => DistanceMethod::VarietySearch,
            _ => DistanceMethod::Analytic,
        };
        Ok(EmbeddedManifold { spec, ambient, dim, degree, method, volume_critical: critical, repr })
    }

    /// Real dimension of the space holding sample points.
    pub fn point_len(&self) -> usize {
        match self.ambient {
            Ambient::Sphere(n) | Ambient::Euclidean(n) => n + 1,
            Ambient::ComplexProjective(n) => 2 * n + 2,
        }
    }

    pub fn is_lift(&self) -> bool {
        matches!(self.spec, ManifoldSpec::HopfLift { .. })
    }

    /// Lower model: the tube of the linear (great or projective) subspace of
    /// the same dimension.
    pub fn lower_model(&self, t: f64) -> Result<f64> {
        match self.ambient {
            Ambient::Sphere(n) if self.dim >= n => Ok(1.0),
            Ambient::Sphere(n) => spherical_tube_fraction(n, self.dim, t),
            Ambient::ComplexProjective(n) if self.dim >= n => Ok(1.0),
            Ambient::ComplexProjective(n) => cp_tube_fraction(n, self.dim, t),
            Ambient::Euclidean(_) => Err(invalid("manifolds live in spheres or projective spaces")),
        }
    }

    /// Upper model `min(1, d · lower)` when the degree is known.
    pub fn upper_model(&self, t: f64) -> Result<Option<f64>> {
        let lower = self.lower_model(t)?;
        Ok(self.degree.map(|d| (d as f64 * lower).min(1.0)))
    }

    /// Geodesic distance from `point` (Fubini–Study for projective
    /// manifolds, with `point` any unit lift). `+∞` when the search fails.
    pub fn geodesic_distance_to(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.point_len() {
            return Err(invalid("point has the wrong length"));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        if (norm(point) - 1.0).abs() > 1e-8 {
            return Err(invalid("point must lie on the unit sphere"));
        }
        Ok(self.raw_distance(point))
    }

    fn raw_distance(&self, x: &[f64]) -> f64 {
        self.distance_above(x, 0.0)
    }

    /// Distance, with searches allowed to stop once it is at most `floor`.
    fn distance_above(&self, x: &[f64], floor: f64) -> f64 {
        match &self.repr {
            Repr::Chart(c) => c.distance(x),
            Repr::Whole => 0.0,
            Repr::Variety(v) => v.distance_above(x, floor),
        }
    }

    /// Distance by direct search over the chart domain: the best of several
    /// Nelder–Mead runs on the angle to the chart image.
    pub fn chart_search_distance(&self, x: &[f64]) -> Result<f64> {
        let Repr::Chart(c) = &self.repr else {
            return Err(invalid("chart search needs a chart manifold"));
        };
        let p = c.params();
        let mut best = f64::INFINITY;
        for s in 0..CHART_STARTS {
            let u0: Vec<f64> = (0..p).map(|i| (s as f64 + 0.5) * PI / CHART_STARTS as f64 * (1.0 + i as f64)).collect();
            let m = nelder_mead(
                |u| {
                    let q = c.point(u);
                    x.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0).acos()
                },
                &u0,
                0.5,
                1e-14,
                f64::NEG_INFINITY,
                2000,
            );
            best = best.min(m.value);
        }
        Ok(best)
    }

    /// Points on the manifold: evenly spaced along circles, random otherwise.
    pub fn sample_on(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = rng::aux_stream(seed, 0x517e);
        match &self.repr {
            Repr::Chart(c) if c.params() == 1 => Ok((0..count).map(|i| c.point(&[2.0 * PI * i as f64 / count as f64])).collect()),
            Repr::Chart(Chart::GreatSphere { n, k }) => Ok((0..count)
                .map(|_| {
                    let mut p = unit_vector(k + 1, &mut rng);
                    p.resize(n + 1, 0.0);
                    p
                })
                .collect()),
            Repr::Chart(c) => Ok((0..count)
                .map(|_| {
                    let u: Vec<f64> = (0..c.params()).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
                    c.point(&u)
                })
                .collect()),
            Repr::Whole => Ok((0..count).map(|_| unit_vector(self.point_len(), &mut rng)).collect()),
            Repr::Variety(v) => v.sample_points(count, seed),
        }
    }

    fn variety(&self) -> Option<&Variety> {
        match &self.repr {
            Repr::Variety(v) => Some(v),
            _ => None,
        }
    }
}

/// Monte Carlo tube fraction with its model bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TubeEstimate {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub lower: f64,
    pub upper: Option<f64>,
    pub failure_fraction: f64,
}

fn check_radii(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(invalid("empty t grid"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("t"));
    }
    if t_grid.iter().any(|t| !(*t > 0.0 && *t <= FRAC_PI_2)) {
        return Err(invalid("t must lie in (0, pi/2]"));
    }
    Ok(())
}

/// Tube fractions at every radius from one pass of uniform ambient samples.
pub fn tube_curve(m: &EmbeddedManifold, t_grid: &[f64], count: usize, seed: u64) -> Result<Vec<TubeEstimate>> {
    check_radii(t_grid)?;
    if count == 0 {
        return Err(invalid("need at least one sample"));
    }
    let len = m.point_len();
    let floor = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let parts = rng::chunked(count, seed, |rng, chunk| {
        let mut hits = vec![0usize; t_grid.len()];
        let mut failures = 0usize;
        for _ in 0..chunk {
            let x = unit_vector(len, rng);
            let d = m.distance_above(&x, floor);
            if !d.is_finite() {
                failures += 1;
                continue;
            }
            for (h, t) in hits.iter_mut().zip(t_grid) {
                if d <= *t {
                    *h += 1;
                }
            }
        }
        (hits, failures)
    });
    let failures: usize = parts.iter().map(|p| p.1).sum();
    let total = count as f64;
    t_grid
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let h: usize = parts.iter().map(|p| p.0[i]).sum();
            let p = h as f64 / total;
            Ok(TubeEstimate {
                t: *t,
                estimate: p,
                stderr: (p * (1.0 - p) / total).sqrt(),
                lower: m.lower_model(*t)?,
                upper: m.upper_model(*t)?,
                failure_fraction: failures as f64 / total,
            })
        })
        .collect()
}

pub fn tube_fraction_mc(m: &EmbeddedManifold, t: f64, count: usize, seed: u64) -> Result<TubeEstimate> {
    Ok(tube_curve(m, &[t], count, seed)?.remove(0))
}

/// One radius of a degree-bound check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub estimate: TubeEstimate,
    /// `lower ≤ estimate + 3σ`.
    pub lower_ok: bool,
    /// `estimate − 3σ − failures ≤ d · lower`.
    pub upper_ok: bool,
    pub status: Status,
}

fn judge(e: &TubeEstimate, degree: u32) -> BoundCheck {
    let budget = SIGNIFICANCE * e.stderr;
    let upper = (degree as f64 * e.lower).min(1.0);
    let lower_ok = e.estimate + budget >= e.lower;
    let upper_ok = e.estimate - budget - e.failure_fraction <= upper;
    let status = if e.failure_fraction > FAILURE_LIMIT {
        Status::Inconclusive
    } else if lower_ok && upper_ok {
        Status::Satisfied
    } else {
        Status::Violated
    };
    BoundCheck { estimate: TubeEstimate { upper: Some(upper), ..e.clone() }, lower_ok, upper_ok, status }
}

/// Smallest relative gradient over `probes` points of the variety.
pub fn smoothness_probe(m: &EmbeddedManifold, probes: usize, seed: u64) -> Result<f64> {
    let v = m.variety().ok_or_else(|| invalid("smoothness probe needs a projective hypersurface"))?;
    Ok(v.sample_points(probes, seed)?.iter().map(|x| v.gradient_ratio(x)).fold(f64::INFINITY, f64::min))
}

/// Checks `vol(CP^k + t) ≤ vol(X + t) ≤ d · vol(CP^k + t)` on a grid of radii.
pub fn degree_bound_check(m: &EmbeddedManifold, degree: u32, t_grid: &[f64], count: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    if !matches!(m.ambient, Ambient::ComplexProjective(_)) {
        return Err(invalid("degree bounds need a projective manifold"));
    }
    if degree == 0 {
        return Err(invalid("degree must be positive"));
    }
    if m.variety().is_some() && smoothness_probe(m, 200, seed)? < 1e-6 {
        return Err(Error::Degenerate("variety has a singular point".into()));
    }
    Ok(tube_curve(m, t_grid, count, seed)?.iter().map(|e| judge(e, degree)).collect())
}

/// Tube fractions of `X ⊂ CP^n` and of its Hopf lift, from independent samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HopfRow {
    pub t: f64,
    pub base: TubeEstimate,
    pub lift: TubeEstimate,
    pub agree: bool,
}

pub fn hopf_consistency(base: &EmbeddedManifold, t_grid: &[f64], count: usize, seed: u64) -> Result<Vec<HopfRow>> {
    let lift = hopf_lift(base)?;
    let a = tube_curve(base, t_grid, count, seed)?;
    let b = tube_curve(&lift, t_grid, count, seed.wrapping_add(1))?;
    Ok(a.into_iter()
        .zip(b)
        .map(|(a, b)| {
            let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            let agree = (a.estimate - b.estimate).abs() <= SIGNIFICANCE * se;
            HopfRow { t: a.t, base: a, lift: b, agree }
        })
        .collect())
}

/// The circle-invariant preimage of a projective manifold in `S^{2n+1}`.
pub fn hopf_lift(base: &EmbeddedManifold) -> Result<EmbeddedManifold> {
    let Ambient::ComplexProjective(n) = base.ambient else {
        return Err(invalid("the Hopf lift needs a projective base"));
    };
    Ok(EmbeddedManifold {
        spec: ManifoldSpec::HopfLift { base: Box::new(base.spec.clone()) },
        ambient: Ambient::Sphere(2 * n + 1),
        dim: 2 * base.dim + 1,
        degree: base.degree,
        method: base.method,
        volume_critical: true,
        repr: base.repr.clone(),
    })
}

/// Largest changes of distance and of the defining equation under the
/// circle action.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleProbe {
    pub points: usize,
    pub max_distance_change: f64,
    pub max_membership_residual: f64,
}

pub fn circle_invariance_probe(lift: &EmbeddedManifold, points: usize, seed: u64) -> Result<CircleProbe> {
    if !lift.is_lift() {
        return Err(invalid("circle probe needs a Hopf lift"));
    }
    let mut rng = rng::aux_stream(seed, 0xc1c1);
    let mut dist_change = 0.0f64;
    let mut residual = 0.0f64;
    for _ in 0..points {
        let theta = rng.random::<f64>() * 2.0 * PI;
        let x = unit_vector(lift.point_len(), &mut rng);
        let d0 = lift.raw_distance(&x);
        let d1 = lift.raw_distance(&rotate_phase(&x, theta));
        if d0.is_finite() && d1.is_finite() {
            dist_change = dist_change.max((d0 - d1).abs());
        }
    }
    if let Some(v) = lift.variety() {
        for x in v.sample_points(points, seed)? {
            let theta = rng.random::<f64>() * 2.0 * PI;
            residual = residual.max(v.membership_residual(&rotate_phase(&x, theta)));
        }
    }
    Ok(CircleProbe { points, max_distance_change: dist_change, max_membership_residual: residual })
}

/// Volume of a projective hypersurface by counting its intersections with
/// random complex lines.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CroftonReport {
    pub lines: usize,
    pub mean_intersections: f64,
    /// `mean · vol(CP^{n-1})`.
    pub volume: f64,
    /// `d · vol(CP^{n-1})`.
    pub model_volume: f64,
    pub ratio: f64,
}

pub fn crofton_degree_probe(m: &EmbeddedManifold, lines: usize, seed: u64) -> Result<CroftonReport> {
    let v = m.variety().ok_or_else(|| invalid("line counting needs a projective hypersurface"))?;
    let k = v.n - 1;
    // Fubini–Study volume of CP^k
    let unit = PI.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
    let mean = v.line_intersection_mean(lines, seed)?;
    let model = v.degree as f64 * unit;
    Ok(CroftonReport { lines, mean_intersections: mean, volume: mean * unit, model_volume: model, ratio: mean * unit / model })
}

/// Per-cell masses and normal-displacement histograms of a Voronoi
/// decomposition of the ambient sphere around sites on a hypersurface.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VoronoiReport {
    pub sites: usize,
    pub cell_mass: Vec<f64>,
    pub cell_stderr: Vec<f64>,
    /// Bin centers of the displacement histograms.
    pub bin_centers: Vec<f64>,
    pub histograms: Vec<Vec<usize>>,
    pub mode_central: Vec<bool>,
    pub all_central: bool,
    pub volume_critical: bool,
}

pub fn voronoi_disintegration_probe(m: &EmbeddedManifold, site_count: usize, count: usize, seed: u64) -> Result<VoronoiReport> {
    let Repr::Chart(chart) = &m.repr else {
        return Err(invalid("the Voronoi probe needs a chart manifold"));
    };
    let Ambient::Sphere(n) = m.ambient else { unreachable!("charts live in spheres") };
    if m.dim + 1 != n {
        return Err(invalid("the Voronoi probe needs a hypersurface"));
    }
    if site_count == 0 {
        return Err(invalid("need at least one site"));
    }
    let sites = m.sample_on(site_count, seed)?;
    let width = 2.0 * BAND / BAND_BINS as f64;
    let parts = rng::chunked(count, seed, |rng, chunk| {
        let mut cells = vec![0usize; site_count];
        let mut hist = vec![vec![0usize; BAND_BINS]; site_count];
        for _ in 0..chunk {
            let x = unit_vector(n + 1, rng);
            let cell = sites
                .iter()
                .map(|s| s.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            cells[cell] += 1;
            let s = chart.displacement(&x).unwrap_or(f64::NAN);
            if s.abs() < BAND {
                let bin = (((s + BAND) / width) as usize).min(BAND_BINS - 1);
                hist[cell][bin] += 1;
            }
        }
        (cells, hist)
    });
    let mut cells = vec![0usize; site_count];
    let mut histograms = vec![vec![0usize; BAND_BINS]; site_count];
    for (c, h) in &parts {
        for i in 0..site_count {
            cells[i] += c[i];
            for b in 0..BAND_BINS {
                histograms[i][b] += h[i][b];
            }
        }
    }
    if histograms.iter().any(|h| h.iter().sum::<usize>() < MIN_CELL_SAMPLES) {
        return Err(Error::Degenerate(format!(
            "fewer than {MIN_CELL_SAMPLES} band samples in a cell; use fewer sites or more samples"
        )));
    }
    let total = count as f64;
    let cell_mass: Vec<f64> = cells.iter().map(|c| *c as f64 / total).collect();
    let cell_stderr = cell_mass.iter().map(|p| (p * (1.0 - p) / total).sqrt()).collect();
    let mid = BAND_BINS / 2;
    let mode_central: Vec<bool> = histograms.iter().map(|h| h.iter().enumerate().all(|(b, c)| b == mid || *c < h[mid])).collect();
    Ok(VoronoiReport {
        sites: site_count,
        cell_mass,
        cell_stderr,
        bin_centers: (0..BAND_BINS).map(|b| -BAND + (b as f64 + 0.5) * width).collect(),
        all_central: mode_central.iter().all(|c| *c),
        histograms,
        mode_central,
        volume_critical: m.volume_critical,
    })
}
