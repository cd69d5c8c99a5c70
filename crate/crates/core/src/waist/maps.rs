//! Test maps with their fibers.
//!
//! Every map knows how to measure the distance from a point to a fiber
//! `f^{-1}(y)`, either by a closed formula or by a multi-start projected
//! Gauss–Newton search. Searched distances come from a point that lies on the
//! fiber, so they are upper bounds on the true distance.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::constrained::{self, ConstraintSet, Workspace};
use crate::rng;

/// Number of starts for the projected search.
pub const STARTS: usize = 8;
/// Iteration cap for the projected search.
pub const MAX_STEPS: usize = 100;

/// Serializable description of a builtin map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `x ↦ (x_i)_{i ∈ indices}`; on a sphere of `sphere_radius` when given.
    Coordinates {
        n: usize,
        indices: Vec<usize>,
        #[serde(default)]
        sphere_radius: Option<f64>,
    },
    /// `x ↦ |x|`.
    Radius { n: usize },
    /// `min(|x − p|, 1 + |x|(θ(x) − theta))` with `p = e_1` and `θ(x)` the
    /// angle between `x` and `p`. The level set `{f = 1}` is the sphere
    /// `|x − p| = 1` outside the cone `θ < theta`, continued by the cone
    /// surface; it meets the unit sphere along the cone, radially.
    ConeCorrected { n: usize, theta: f64 },
    /// First `k − 1` coordinates, then `max(d(u) − width, 0)` where `u` are
    /// the remaining coordinates and `d` is the distance to the half
    /// hyperplane `{u_last = 0, u_1 ≥ 0}`. The zero fiber is a thin slab
    /// around that half hyperplane, passing through the origin.
    HalfPlaneSector { n: usize, k: usize, width: f64 },
    /// `x_1 + eps · x_2³`; on a sphere of `sphere_radius` when given.
    OddCubic {
        n: usize,
        eps: f64,
        #[serde(default)]
        sphere_radius: Option<f64>,
    },
    /// `x_1 + amp · sin x_2` on `R²`.
    SineShear { amp: f64 },
    /// `(z_1, z_2) ↦ z_1 z_2` on `C² = R⁴`.
    ComplexProduct,
    /// `(z_1, z_2) ↦ z_1² + z_2²` on `C² = R⁴`.
    FermatQuadric,
}

/// Where the map lives and which metric measures fiber neighborhoods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `R^n` with the Euclidean distance.
    Euclidean,
    /// The sphere of this radius in `R^n` with its geodesic distance.
    Sphere(f64),
}

/// How fiber distances are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberMethod {
    Analytic,
    Optimization,
}

/// A validated map together with its metadata.
#[derive(Clone, Debug, Serialize)]
pub struct TestMap {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub domain: Domain,
    pub odd: bool,
    /// Homogeneity degree when the map is homogeneous.
    pub degree: Option<u32>,
    pub spec: MapSpec,
    #[serde(skip)]
    offsets: Vec<Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl TestMap {
    pub fn new(spec: MapSpec) -> Result<Self> {
        let radius_ok = |r: &Option<f64>| match r {
            Some(r) if !(r.is_finite() && *r > 0.0) => Err(invalid("sphere radius must be positive")),
            _ => Ok(()),
        };
        let (name, n, k, domain, odd, degree) = match &spec {
            MapSpec::Coordinates { n, indices, sphere_radius } => {
                radius_ok(sphere_radius)?;
                if indices.is_empty() || indices.len() >= *n || indices.iter().any(|i| i >= n) {
                    return Err(invalid("coordinate map needs 1 <= k < n distinct indices below n"));
                }
                let mut sorted = indices.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != indices.len() {
                    return Err(invalid("coordinate indices must be distinct"));
                }
                let domain = sphere_radius.map_or(Domain::Euclidean, Domain::Sphere);
                ("coordinates", *n, indices.len(), domain, true, Some(1))
            }
            MapSpec::Radius { n } => ("radius", *n, 1, Domain::Euclidean, false, Some(1)),
            MapSpec::ConeCorrected { n, theta } => {
                if !(theta.is_finite() && *theta > std::f64::consts::FRAC_PI_3 && *theta < std::f64::consts::FRAC_PI_2) {
                    return Err(invalid("cone angle must lie strictly between π/3 and π/2"));
                }
                ("cone_corrected", *n, 1, Domain::Euclidean, false, None)
            }
            MapSpec::HalfPlaneSector { n, k, width } => {
                if *k < 2 || k >= n {
                    return Err(invalid("half-plane sector map needs 2 <= k < n"));
                }
                if !(width.is_finite() && *width >= 0.0) {
                    return Err(invalid("sector width must be nonnegative"));
                }
                ("half_plane_sector", *n, *k, Domain::Euclidean, false, None)
            }
            MapSpec::OddCubic { n, eps, sphere_radius } => {
                radius_ok(sphere_radius)?;
                if !eps.is_finite() {
                    return Err(invalid("cubic coefficient must be finite"));
                }
                let domain = sphere_radius.map_or(Domain::Euclidean, Domain::Sphere);
                let degree = (*eps == 0.0).then_some(1);
                ("odd_cubic", *n, 1, domain, true, degree)
            }
            MapSpec::SineShear { amp } => {
                if !amp.is_finite() {
                    return Err(invalid("shear amplitude must be finite"));
                }
                ("sine_shear", 2, 1, Domain::Euclidean, true, None)
            }
            MapSpec::ComplexProduct => ("complex_product", 4, 2, Domain::Euclidean, false, Some(2)),
            MapSpec::FermatQuadric => ("fermat_quadric", 4, 2, Domain::Euclidean, false, Some(2)),
        };
        if n < 2 || n > 16 {
            return Err(invalid("ambient dimension must lie in 2..=16"));
        }
        let mut r = rng::aux_stream(0x5741_5354, n as u64);
        let offsets = (1..STARTS)
            .map(|_| {
                let v: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                let s = norm(&v);
                v.iter().map(|x| 0.5 * x / s).collect()
            })
            .collect();
        Ok(TestMap { name: name.to_string(), n, k, domain, odd, degree, spec, offsets })
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        self.eval_jac(x, &mut out, None);
        out
    }

    /// Values and, when requested, the row-major `k × n` Jacobian. At kinks
    /// the Jacobian of the active branch is returned.
    fn eval_jac(&self, x: &[f64], out: &mut [f64], jac: Option<&mut [f64]>) {
        let n = self.n;
        let mut scratch = Vec::new();
        let j: &mut [f64] = match jac {
            Some(j) => {
                j.iter_mut().for_each(|v| *v = 0.0);
                j
            }
            None => {
                scratch.resize(self.k * n, 0.0);
                &mut scratch
            }
        };
        match &self.spec {
            MapSpec::Coordinates { indices, .. } => {
                for (r, &i) in indices.iter().enumerate() {
                    out[r] = x[i];
                    j[r * n + i] = 1.0;
                }
            }
            MapSpec::Radius { .. } => {
                let r = norm(x);
                out[0] = r;
                if r > 0.0 {
                    for d in 0..n {
                        j[d] = x[d] / r;
                    }
                }
            }
            MapSpec::ConeCorrected { theta, .. } => {
                let r = norm(x);
                let mut g2 = 0.0;
                for d in 0..n {
                    let v = x[d] - if d == 0 { 1.0 } else { 0.0 };
                    g2 += v * v;
                }
                let g = g2.sqrt();
                let ang = if r > 0.0 { (x[0] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
                let h = 1.0 + r * (ang - theta);
                if g <= h || r == 0.0 {
                    out[0] = g;
                    if g > 0.0 {
                        for d in 0..n {
                            j[d] = (x[d] - if d == 0 { 1.0 } else { 0.0 }) / g;
                        }
                    }
                } else {
                    out[0] = h;
                    // ∇(r·θ) = θ x/r + r ∇θ, ∇θ = −(e_1 − cosθ x/r)/(r sinθ)
                    let s = ang.sin().max(1e-300);
                    for d in 0..n {
                        let e = if d == 0 { 1.0 } else { 0.0 };
                        j[d] = (ang - theta) * x[d] / r - (e - ang.cos() * x[d] / r) / s;
                    }
                }
            }
            MapSpec::HalfPlaneSector { k, width, .. } => {
                for r in 0..k - 1 {
                    out[r] = x[r];
                    j[r * n + r] = 1.0;
                }
                let (d, grad) = sector_distance(&x[k - 1..]);
                out[k - 1] = (d - width).max(0.0);
                if d > *width {
                    for (c, g) in grad.iter().enumerate() {
                        j[(k - 1) * n + k - 1 + c] = *g;
                    }
                }
            }
            MapSpec::OddCubic { eps, .. } => {
                out[0] = x[0] + eps * x[1].powi(3);
                j[0] = 1.0;
                j[1] = 3.0 * eps * x[1] * x[1];
            }
            MapSpec::SineShear { amp } => {
                out[0] = x[0] + amp * x[1].sin();
                j[0] = 1.0;
                j[1] = amp * x[1].cos();
            }
            MapSpec::ComplexProduct => {
                out[0] = x[0] * x[2] - x[1] * x[3];
                out[1] = x[0] * x[3] + x[1] * x[2];
                j[..4].copy_from_slice(&[x[2], -x[3], x[0], -x[1]]);
                j[4..8].copy_from_slice(&[x[3], x[2], x[1], x[0]]);
            }
            MapSpec::FermatQuadric => {
                out[0] = x[0] * x[0] - x[1] * x[1] + x[2] * x[2] - x[3] * x[3];
                out[1] = 2.0 * (x[0] * x[1] + x[2] * x[3]);
                j[..4].copy_from_slice(&[2.0 * x[0], -2.0 * x[1], 2.0 * x[2], -2.0 * x[3]]);
                j[4..8].copy_from_slice(&[2.0 * x[1], 2.0 * x[0], 2.0 * x[3], 2.0 * x[2]]);
            }
        }
    }

    /// Whether the fiber over `y` has a closed-form distance.
    pub fn method(&self, y: &[f64]) -> FiberMethod {
        let zero = y.iter().all(|v| *v == 0.0);
        let analytic = match &self.spec {
            MapSpec::Coordinates { sphere_radius, .. } => sphere_radius.is_none() || zero,
            MapSpec::Radius { .. } | MapSpec::HalfPlaneSector { .. } => true,
            MapSpec::ConeCorrected { .. } => y[0] == 1.0,
            MapSpec::OddCubic { eps, sphere_radius, .. } => *eps == 0.0 && (sphere_radius.is_none() || zero),
            MapSpec::ComplexProduct | MapSpec::FermatQuadric => zero,
            MapSpec::SineShear { .. } => false,
        };
        if analytic {
            FiberMethod::Analytic
        } else {
            FiberMethod::Optimization
        }
    }

    /// Distance from `x` to `f^{-1}(y)` in the map's metric: `+∞` for an
    /// empty fiber, NaN when no search start reaches the fiber.
    pub fn fiber_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.method(y) {
            FiberMethod::Analytic => self.analytic_distance(x, y),
            FiberMethod::Optimization => self.searched_distance(x, y).map_or(f64::NAN, |(d, _)| d),
        }
    }

    /// A point on `f^{-1}(y)` close to `x`: the exact nearest point for
    /// coordinate maps, the best search result otherwise.
    pub fn nearest_fiber_point(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        if let MapSpec::Coordinates { indices, sphere_radius: None, .. } = &self.spec {
            let mut z = x.to_vec();
            for (i, v) in indices.iter().zip(y) {
                z[*i] = *v;
            }
            return Some(z);
        }
        self.searched_distance(x, y).map(|(_, z)| z)
    }

    fn analytic_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.spec {
            MapSpec::Coordinates { indices, sphere_radius, .. } => match sphere_radius {
                None => indices.iter().zip(y).map(|(i, v)| (x[*i] - v).powi(2)).sum::<f64>().sqrt(),
                Some(r) => {
                    // distance to a great subsphere
                    let s = indices.iter().map(|i| x[*i] * x[*i]).sum::<f64>().sqrt();
                    r * (s / r).min(1.0).asin()
                }
            },
            MapSpec::OddCubic { sphere_radius, .. } => match sphere_radius {
                None => (x[0] - y[0]).abs(),
                Some(r) => r * (x[0].abs() / r).min(1.0).asin(),
            },
            MapSpec::Radius { .. } => {
                if y[0] < 0.0 {
                    f64::INFINITY
                } else {
                    (norm(x) - y[0]).abs()
                }
            }
            MapSpec::ConeCorrected { theta, .. } => cone_fiber_distance(x, *theta),
            MapSpec::HalfPlaneSector { k, width, .. } => {
                let k = *k;
                let last = y[k - 1];
                if last < 0.0 {
                    return f64::INFINITY;
                }
                let lin: f64 = (0..k - 1).map(|r| (x[r] - y[r]).powi(2)).sum();
                let (d, _) = sector_distance(&x[k - 1..]);
                let gap = if last == 0.0 { (d - width).max(0.0) } else { (d - width - last).abs() };
                (lin + gap * gap).sqrt()
            }
            MapSpec::ComplexProduct => {
                let z1 = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let z2 = (x[2] * x[2] + x[3] * x[3]).sqrt();
                z1.min(z2)
            }
            MapSpec::FermatQuadric => {
                // the two lines z_1 = ±i z_2
                let a = ((x[0] + x[3]).powi(2) + (x[1] - x[2]).powi(2)).sqrt();
                let b = ((x[0] - x[3]).powi(2) + (x[1] + x[2]).powi(2)).sqrt();
                a.min(b) * FRAC_1_SQRT_2
            }
            MapSpec::SineShear { .. } => unreachable!("no closed form"),
        }
    }

    /// Multi-start projected Gauss–Newton: alternate Newton projection onto
    /// the constraint set with a step toward `x` in its tangent space.
    /// Returns the best distance and the fiber point achieving it.
    fn searched_distance(&self, x: &[f64], y: &[f64]) -> Option<(f64, Vec<f64>)> {
        let sphere = match self.domain {
            Domain::Sphere(r) => Some(r),
            Domain::Euclidean => None,
        };
        let set = FiberSet { map: self, y, sphere };
        let mut ws = Workspace::new(&set);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for s in 0..STARTS {
            let mut z = x.to_vec();
            if s > 0 {
                let scale = 1.0f64.max(norm(x));
                for (v, o) in z.iter_mut().zip(&self.offsets[s - 1]) {
                    *v += scale * o;
                }
            }
            if let Some(r) = sphere {
                let s = norm(&z);
                if s == 0.0 {
                    continue;
                }
                z.iter_mut().for_each(|v| *v *= r / s);
            }
            if !constrained::descend(&set, x, &mut z, &mut ws, MAX_STEPS) {
                continue;
            }
            let chord = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let d = match sphere {
                Some(r) => 2.0 * r * (chord / (2.0 * r)).min(1.0).asin(),
                None => chord,
            };
            if best.as_ref().is_none_or(|(b, _)| d < *b) {
                best = Some((d, z));
            }
        }
        best
    }
}

/// The fiber `f^{-1}(y)`, intersected with the sphere for sphere maps.
struct FiberSet<'a> {
    map: &'a TestMap,
    y: &'a [f64],
    sphere: Option<f64>,
}

impl ConstraintSet for FiberSet<'_> {
    fn ambient_dim(&self) -> usize {
        self.map.n
    }

    fn constraints(&self) -> usize {
        self.map.k + usize::from(self.sphere.is_some())
    }

    fn residual(&self, z: &[f64], res: &mut [f64], jac: &mut [f64]) {
        let (n, k) = (self.map.n, self.map.k);
        self.map.eval_jac(z, &mut res[..k], Some(&mut jac[..k * n]));
        for (r, y) in res.iter_mut().zip(self.y) {
            *r -= y;
        }
        if let Some(rad) = self.sphere {
            res[k] = (z.iter().map(|v| v * v).sum::<f64>() - rad * rad) / (2.0 * rad);
            for d in 0..n {
                jac[k * n + d] = z[d] / rad;
            }
        }
    }
}

/// Distance from `u` to `{u_last = 0, u_1 ≥ 0}` and its gradient.
fn sector_distance(u: &[f64]) -> (f64, Vec<f64>) {
    let last = u.len() - 1;
    let a = u[0].min(0.0);
    let b = u[last];
    let d = (a * a + b * b).sqrt();
    let mut g = vec![0.0; u.len()];
    if d > 0.0 {
        g[0] = a / d;
        g[last] = b / d;
    }
    (d, g)
}

/// Distance to `{f = 1}` for the cone-corrected map, computed in the
/// meridian half-plane `(a, ρ)` with `a = x_1` and `ρ` the distance to the
/// `e_1` axis. The fiber there is the arc of the circle of radius 1 about
/// `(1, 0)` from the origin to polar angle `theta`, followed by the ray at
/// angle `theta`.
fn cone_fiber_distance(x: &[f64], theta: f64) -> f64 {
    let a = x[0];
    let rho = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let r1 = 2.0 * theta.cos();
    let (c, s) = (theta.cos(), theta.sin());
    let start = (r1 * c, r1 * s);
    // ray part
    let tau = ((a - start.0) * c + (rho - start.1) * s).max(0.0);
    let ray = ((a - start.0 - tau * c).powi(2) + (rho - start.1 - tau * s).powi(2)).sqrt();
    // arc part: circle points (1 + cos ψ, sin ψ) with ψ ∈ [2θ, π]
    let psi = rho.atan2(a - 1.0);
    let arc = if psi >= 2.0 * theta {
        (((a - 1.0).powi(2) + rho * rho).sqrt() - 1.0).abs()
    } else {
        let to_start = ((a - start.0).powi(2) + (rho - start.1).powi(2)).sqrt();
        let to_origin = (a * a + rho * rho).sqrt();
        to_start.min(to_origin)
    };
    ray.min(arc)
}

/// Representative instances of every builtin map.
pub fn builtin_maps() -> Vec<TestMap> {
    let specs = vec![
        MapSpec::Coordinates { n: 3, indices: vec![2], sphere_radius: None },
        MapSpec::Coordinates { n: 3, indices: vec![0], sphere_radius: Some(1.0) },
        MapSpec::Radius { n: 2 },
        MapSpec::ConeCorrected { n: 3, theta: 1.15 },
        MapSpec::HalfPlaneSector { n: 3, k: 2, width: 0.01 },
        MapSpec::OddCubic { n: 3, eps: 0.1, sphere_radius: Some(1.0) },
        MapSpec::SineShear { amp: 0.3 },
        MapSpec::ComplexProduct,
        MapSpec::FermatQuadric,
    ];
    specs.into_iter().map(|s| TestMap::new(s).expect("builtin map is valid")).collect()
}

/// Largest `|f(−x) + f(x)|` over `count` Gaussian probes.
pub fn oddness_defect(map: &TestMap, count: usize, seed: u64) -> f64 {
    let mut r = rng::aux_stream(seed, 0x0dd);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let x: Vec<f64> = (0..map.n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        for (a, b) in map.evaluate(&x).iter().zip(map.evaluate(&neg)) {
            worst = worst.max((a + b).abs());
        }
    }
    worst
}

/// Largest relative `|f(λx) − λ^d f(x)|` over `count` probes with
/// `λ ∈ [0.25, 4]`.
pub fn homogeneity_defect(map: &TestMap, degree: u32, count: usize, seed: u64) -> f64 {
    let mut r = rng::aux_stream(seed, 0x4040);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let x: Vec<f64> = (0..map.n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let lam = 0.25 + 3.75 * r.random::<f64>();
        let scaled: Vec<f64> = x.iter().map(|v| lam * v).collect();
        let f = map.evaluate(&x);
        let g = map.evaluate(&scaled);
        let p = lam.powi(degree as i32);
        for (a, b) in f.iter().zip(&g) {
            worst = worst.max((b - p * a).abs() / (1.0 + (p * a).abs()));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(spec: MapSpec) -> TestMap {
        TestMap::new(spec).unwrap()
    }

    #[test]
    fn builtin_metadata_probes() {
        for m in builtin_maps() {
            if m.odd {
                assert!(oddness_defect(&m, 200, 1) <= 1e-10, "{}", m.name);
            }
            if let Some(d) = m.degree {
                assert!(homogeneity_defect(&m, d, 200, 2) <= 1e-10, "{}", m.name);
            }
        }
        let cubic = map(MapSpec::OddCubic { n: 3, eps: 0.1, sphere_radius: None });
        assert!(oddness_defect(&cubic, 500, 3) <= 1e-10);
        assert!(homogeneity_defect(&map(MapSpec::ComplexProduct), 2, 500, 4) <= 1e-10);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(TestMap::new(MapSpec::Coordinates { n: 3, indices: vec![1, 1], sphere_radius: None }).is_err());
        assert!(TestMap::new(MapSpec::HalfPlaneSector { n: 3, k: 1, width: 0.0 }).is_err());
        assert!(TestMap::new(MapSpec::ConeCorrected { n: 3, theta: 1.0 }).is_err());
        let bad: std::result::Result<MapSpec, _> = serde_json::from_str(r#"{"name":"radius","n":2,"extra":1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn cone_fiber_meets_the_sphere_radially() {
        let theta = 1.15;
        let m = map(MapSpec::ConeCorrected { n: 3, theta });
        for phi in [0.0, 1.0, 2.5, 4.0] {
            let x = [theta.cos(), theta.sin() * f64::cos(phi), theta.sin() * f64::sin(phi)];
            assert!((m.evaluate(&x)[0] - 1.0).abs() < 1e-12);
            // gradient is tangent to the unit sphere there
            let h = 1e-6;
            let grad: Vec<f64> = (0..3)
                .map(|d| {
                    let mut a = x;
                    let mut b = x;
                    a[d] += h;
                    b[d] -= h;
                    (m.evaluate(&a)[0] - m.evaluate(&b)[0]) / (2.0 * h)
                })
                .collect();
            let radial: f64 = grad.iter().zip(&x).map(|(g, v)| g * v).sum();
            assert!(radial.abs() < 1e-6, "{radial}");
            assert!(m.fiber_distance(&x, &[1.0]) < 1e-12);
        }
        // f never exceeds |x − e_1|
        let mut r = rng::aux_stream(9, 1);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| 2.0 * r.sample::<f64, _>(StandardNormal)).collect();
            let g = ((x[0] - 1.0).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt();
            assert!(m.evaluate(&x)[0] <= g + 1e-15);
        }
    }

    #[test]
    fn cone_fiber_distance_agrees_with_search() {
        let m = map(MapSpec::ConeCorrected { n: 3, theta: 1.15 });
        let mut r = rng::aux_stream(10, 1);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let exact = m.fiber_distance(&x, &[1.0]);
            if let Some((d, z)) = m.searched_distance(&x, &[1.0]) {
                assert!((m.evaluate(&z)[0] - 1.0).abs() <= 1e-9);
                assert!(d >= exact - 1e-9, "{x:?} search {d} exact {exact}");
            }
        }
    }

    #[test]
    fn sector_fiber_reaches_every_pole_at_unit_distance() {
        for (n, k) in [(3, 2), (4, 2), (4, 3)] {
            let m = map(MapSpec::HalfPlaneSector { n, k, width: 0.01 });
            let y = vec![0.0; k];
            assert!(m.fiber_distance(&vec![0.0; n], &y) == 0.0);
            for i in 0..n {
                for s in [-1.0, 1.0] {
                    let mut e = vec![0.0; n];
                    e[i] = s;
                    assert!(m.fiber_distance(&e, &y) <= 1.0 + 1e-12, "n {n} k {k} pole {i} {s}");
                }
            }
        }
    }

    #[test]
    fn complex_zero_sets_have_closed_form_distance() {
        let mut r = rng::aux_stream(11, 1);
        for spec in [MapSpec::ComplexProduct, MapSpec::FermatQuadric] {
            let m = map(spec);
            for _ in 0..200 {
                let x: Vec<f64> = (0..4).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                let exact = m.fiber_distance(&x, &[0.0, 0.0]);
                let (d, z) = m.searched_distance(&x, &[0.0, 0.0]).unwrap();
                assert!(m.evaluate(&z).iter().all(|v| v.abs() < 1e-9));
                assert!(d >= exact - 1e-9 && d <= exact + 1e-6, "{} search {d} exact {exact}", m.name);
            }
        }
    }

    #[test]
    fn sphere_search_matches_great_circle() {
        let m = map(MapSpec::OddCubic { n: 3, eps: 0.0, sphere_radius: Some(1.0) });
        let mut r = rng::aux_stream(12, 1);
        for _ in 0..200 {
            let v: Vec<f64> = (0..3).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let s = norm(&v);
            let x: Vec<f64> = v.iter().map(|a| a / s).collect();
            let exact = x[0].abs().asin();
            let (d, _) = m.searched_distance(&x, &[0.0]).unwrap();
            assert!((d - exact).abs() < 1e-7, "{d} {exact}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn searched_distance_is_an_upper_bound(a in -2.0f64..2.0, b in -2.0f64..2.0, y in -0.5f64..0.5) {
            // the fiber x_1 = y − 0.3 sin x_2 passes through (y − 0.3 sin b, b)
            let m = map(MapSpec::SineShear { amp: 0.3 });
            let d = m.fiber_distance(&[a, b], &[y]);
            prop_assert!(d <= (a - y + 0.3 * b.sin()).abs() + 1e-9);
            // and no closer than the horizontal gap allows for a 0.3-Lipschitz graph
            prop_assert!(d >= (a + 0.3 * b.sin() - y).abs() / (1.0f64 + 0.09).sqrt() - 1e-9);
        }
    }
}
