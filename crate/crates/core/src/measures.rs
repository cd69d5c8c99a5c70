//! Probability measures on `R^n`: anisotropic Gaussians, uniform balls and
//! spheres, radial densities and an atom-plus-sphere mixture.
//!
//! A [`MeasureSpec`] is the serializable description; [`Measure`] is the
//! validated, ready-to-sample form. All measures are normalized to total
//! mass 1.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::quadrature::integrate;
use crate::numeric::special::{ball_volume, sphere_area};
use crate::rng::{self, Rng};

/// Radial profile `ρ(r)` of a rotation-invariant density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    /// `r^exponent`
    Power { exponent: f64 },
    /// `exp(-a r²)`
    Gaussian { a: f64 },
    /// `exp(-rate·r)`
    Exponential { rate: f64 },
    /// Piecewise-linear through `(radii[i], values[i])`, zero past the last radius.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Power { exponent } => {
                if r == 0.0 {
                    if *exponent == 0.0 {
                        1.0
                    } else if *exponent > 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    r.powf(*exponent)
                }
            }
            RadialProfile::Gaussian { a } => (-a * r * r).exp(),
            RadialProfile::Exponential { rate } => (-rate * r).exp(),
            RadialProfile::Tabulated { radii, values } => {
                let last = radii.len() - 1;
                if r > radii[last] {
                    return 0.0;
                }
                if r <= radii[0] {
                    return values[0];
                }
                let j = radii.partition_point(|&x| x <= r).min(last);
                let (r0, r1) = (radii[j - 1], radii[j]);
                let w = (r - r0) / (r1 - r0);
                values[j - 1] * (1.0 - w) + values[j] * w
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RadialProfile::Power { exponent } if !exponent.is_finite() => Err(invalid("power exponent must be finite")),
            RadialProfile::Gaussian { a } if !(a.is_finite() && *a > 0.0) => Err(invalid("gaussian profile needs a > 0")),
            RadialProfile::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                Err(invalid("exponential profile needs rate > 0"))
            }
            RadialProfile::Tabulated { radii, values } => {
                if radii.len() < 2 || radii.len() != values.len() {
                    return Err(invalid("tabulated profile needs matching radii/values of length >= 2"));
                }
                if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !r.is_finite()) {
                    return Err(invalid("tabulated radii must be nonnegative and strictly increasing"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(invalid("tabulated values must be finite and nonnegative"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Natural outer radius of the profile, if it has one.
    fn natural_support(&self) -> Option<f64> {
        match self {
            RadialProfile::Tabulated { radii, .. } => radii.last().copied(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureKind {
    /// Density proportional to `exp(-Σ a_i x_i²)`; scales are kept in
    /// coordinate order.
    GaussianAniso { scales: Vec<f64> },
    UniformBall { radius: f64 },
    UniformSphere { radius: f64 },
    RadialDensity { profile: RadialProfile, support_radius: Option<f64> },
    /// `atom_mass` at the origin, the rest uniform on the sphere of `radius`.
    AtomSphereMix { atom_mass: f64, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct MeasureSpec {
    pub dim: usize,
    pub kind: MeasureKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    dim: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<RadialProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atom_mass: Option<f64>,
}

impl TryFrom<RawMeasure> for MeasureSpec {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        let need_radius = |r: Option<f64>| r.ok_or_else(|| invalid(format!("kind {} needs radius", raw.kind)));
        let kind = match raw.kind.as_str() {
            "gaussian_aniso" => MeasureKind::GaussianAniso {
                scales: raw.scales.clone().ok_or_else(|| invalid("gaussian_aniso needs scales"))?,
            },
            "uniform_ball" => MeasureKind::UniformBall { radius: need_radius(raw.radius)? },
            "uniform_sphere" => MeasureKind::UniformSphere { radius: need_radius(raw.radius)? },
            "radial_density" => MeasureKind::RadialDensity {
                profile: raw.profile.clone().ok_or_else(|| invalid("radial_density needs profile"))?,
                support_radius: raw.support_radius,
            },
            "atom_sphere_mix" => MeasureKind::AtomSphereMix {
                atom_mass: raw.atom_mass.ok_or_else(|| invalid("atom_sphere_mix needs atom_mass"))?,
                radius: need_radius(raw.radius)?,
            },
            other => return Err(invalid(format!("unknown measure kind {other:?}"))),
        };
        let spec = MeasureSpec { dim: raw.dim, kind };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<MeasureSpec> for RawMeasure {
    fn from(spec: MeasureSpec) -> Self {
        let mut raw = RawMeasure {
            dim: spec.dim,
            kind: String::new(),
            scales: None,
            radius: None,
            profile: None,
            support_radius: None,
            atom_mass: None,
        };
        match spec.kind {
            MeasureKind::GaussianAniso { scales } => {
                raw.kind = "gaussian_aniso".into();
                raw.scales = Some(scales);
            }
            MeasureKind::UniformBall { radius } => {
                raw.kind = "uniform_ball".into();
                raw.radius = Some(radius);
            }
            MeasureKind::UniformSphere { radius } => {
                raw.kind = "uniform_sphere".into();
                raw.radius = Some(radius);
            }
            MeasureKind::RadialDensity { profile, support_radius } => {
                raw.kind = "radial_density".into();
                raw.profile = Some(profile);
                raw.support_radius = support_radius;
            }
            MeasureKind::AtomSphereMix { atom_mass, radius } => {
                raw.kind = "atom_sphere_mix".into();
                raw.atom_mass = Some(atom_mass);
                raw.radius = Some(radius);
            }
        }
        raw
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive and finite")))
    }
}

impl MeasureSpec {
    pub fn gaussian(scales: Vec<f64>) -> Self {
        MeasureSpec { dim: scales.len(), kind: MeasureKind::GaussianAniso { scales } }
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        // exp(-|x|²/2)
        Self::gaussian(vec![0.5; dim])
    }

    pub fn uniform_ball(dim: usize, radius: f64) -> Self {
        MeasureSpec { dim, kind: MeasureKind::UniformBall { radius } }
    }

    pub fn uniform_sphere(dim: usize, radius: f64) -> Self {
        MeasureSpec { dim, kind: MeasureKind::UniformSphere { radius } }
    }

    pub fn atom_sphere(dim: usize, atom_mass: f64, radius: f64) -> Self {
        MeasureSpec { dim, kind: MeasureKind::AtomSphereMix { atom_mass, radius } }
    }

    pub fn radial(dim: usize, profile: RadialProfile, support_radius: Option<f64>) -> Self {
        MeasureSpec { dim, kind: MeasureKind::RadialDensity { profile, support_radius } }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        match &self.kind {
            MeasureKind::GaussianAniso { scales } => {
                if scales.len() != self.dim {
                    return Err(invalid(format!("expected {} scales, got {}", self.dim, scales.len())));
                }
                for &a in scales {
                    positive(a, "gaussian scale")?;
                }
            }
            MeasureKind::UniformBall { radius } | MeasureKind::UniformSphere { radius } => positive(*radius, "radius")?,
            MeasureKind::RadialDensity { profile, support_radius } => {
                profile.validate()?;
                if let Some(r) = support_radius {
                    positive(*r, "support radius")?;
                }
            }
            MeasureKind::AtomSphereMix { atom_mass, radius } => {
                positive(*radius, "radius")?;
                if !(0.0..=1.0).contains(atom_mass) {
                    return Err(invalid("atom mass must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// All supported kinds are invariant under `x ↦ -x`.
    pub fn is_centrally_symmetric(&self) -> bool {
        true
    }

    pub fn is_radial(&self) -> bool {
        match &self.kind {
            MeasureKind::GaussianAniso { scales } => scales.iter().all(|&a| a == scales[0]),
            _ => true,
        }
    }

    /// Radius of a ball carrying the whole mass, if bounded.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            MeasureKind::GaussianAniso { .. } => None,
            MeasureKind::UniformBall { radius } | MeasureKind::UniformSphere { radius } => Some(*radius),
            MeasureKind::AtomSphereMix { radius, .. } => Some(*radius),
            MeasureKind::RadialDensity { profile, support_radius } => support_radius.or(profile.natural_support()),
        }
    }
}

/// Continuous radial law: the radius of a sample has density `ρ(r) r^{n-1} / Z`.
#[derive(Clone, Debug)]
pub struct RadialTable {
    profile: RadialProfile,
    dim: usize,
    rmax: f64,
    norm: f64,
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    slope: Vec<f64>,
}

const TABLE_NODES: usize = 1024;

impl RadialTable {
    pub fn new(profile: RadialProfile, dim: usize, support: Option<f64>) -> Result<Self> {
        let g = |r: f64| {
            let v = profile.eval(r) * r.powi(dim as i32 - 1);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        if let RadialProfile::Power { exponent } = profile {
            if exponent + dim as f64 <= 0.0 {
                return Err(Error::NonNormalizable(format!("r^{exponent} is not integrable at the origin in dimension {dim}")));
            }
        }
        let rmax = match support {
            Some(r) => r,
            None => {
                // Double the radius until the tail is negligible.
                let mut r = 1.0f64;
                let mut mass = integrate(g, 0.0, r, 1e-300, 1e-12).value;
                loop {
                    if r > 2f64.powi(50) {
                        return Err(Error::NonNormalizable("radial profile has infinite mass".into()));
                    }
                    let shell = integrate(g, r, 2.0 * r, 1e-300, 1e-12).value;
                    mass += shell;
                    r *= 2.0;
                    if mass > 0.0 && shell <= 1e-16 * mass && g(r) * r <= 1e-16 * mass {
                        break;
                    }
                }
                // Pull the cut back to where the tail beyond is below 1e-15.
                let mut lo = 0.0;
                let mut hi = r;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let tail = integrate(g, mid, r, 1e-300, 1e-10).value;
                    if tail > 1e-15 * mass {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        };
        let h = rmax / (TABLE_NODES - 1) as f64;
        let nodes: Vec<f64> = (0..TABLE_NODES).map(|j| j as f64 * h).collect();
        let mut cdf = vec![0.0; TABLE_NODES];
        for j in 1..TABLE_NODES {
            cdf[j] = cdf[j - 1] + integrate(g, nodes[j - 1], nodes[j], 1e-300, 1e-13).value;
        }
        let norm = cdf[TABLE_NODES - 1];
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonNormalizable("radial profile has zero or infinite mass".into()));
        }
        for c in &mut cdf {
            *c /= norm;
        }
        let mut slope: Vec<f64> = nodes.iter().map(|&r| g(r) / norm).collect();
        // Fritsch–Carlson limiting keeps each Hermite piece monotone.
        for j in 0..TABLE_NODES - 1 {
            let delta = (cdf[j + 1] - cdf[j]) / h;
            if delta <= 0.0 {
                slope[j] = 0.0;
                slope[j + 1] = 0.0;
                continue;
            }
            let a = slope[j] / delta;
            let b = slope[j + 1] / delta;
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                slope[j] = tau * a * delta;
                slope[j + 1] = tau * b * delta;
            }
        }
        Ok(RadialTable { profile, dim, rmax, norm, nodes, cdf, slope })
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// Normalizer `Z = ∫ ρ(r) r^{n-1} dr`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Probability density of the radius.
    pub fn pdf(&self, r: f64) -> f64 {
        if !(0.0..=self.rmax).contains(&r) {
            return 0.0;
        }
        let v = self.profile.eval(r) * r.powi(self.dim as i32 - 1) / self.norm;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    fn hermite(&self, j: usize, s: f64) -> (f64, f64) {
        let h = self.nodes[1] - self.nodes[0];
        let (f0, f1) = (self.cdf[j], self.cdf[j + 1]);
        let (d0, d1) = (self.slope[j] * h, self.slope[j + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * d1;
        let dv = (6.0 * s2 - 6.0 * s) * f0 + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (-6.0 * s2 + 6.0 * s) * f1 + (3.0 * s2 - 2.0 * s) * d1;
        (v, dv)
    }

    /// Interpolated radius CDF.
    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.rmax {
            return 1.0;
        }
        let h = self.nodes[1];
        let j = ((r / h) as usize).min(TABLE_NODES - 2);
        self.hermite(j, (r - self.nodes[j]) / h).0.clamp(0.0, 1.0)
    }

    /// Inverse of [`Self::cdf`].
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.rmax;
        }
        let j = (self.cdf.partition_point(|&c| c <= u)).clamp(1, TABLE_NODES - 1) - 1;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let span = self.cdf[j + 1] - self.cdf[j];
        let mut s = if span > 0.0 { ((u - self.cdf[j]) / span).clamp(0.0, 1.0) } else { 0.5 };
        for _ in 0..60 {
            let (v, dv) = self.hermite(j, s);
            let e = v - u;
            if e.abs() < 1e-15 {
                break;
            }
            if e > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let newton = if dv > 0.0 { s - e / dv } else { f64::NAN };
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        self.nodes[j] + s * (self.nodes[1] - self.nodes[0])
    }
}

/// Decomposition of a rotation-invariant measure into an origin atom, a
/// sphere shell and an absolutely continuous radial part.
#[derive(Clone, Debug)]
pub struct RadialParts<'a> {
    pub origin_atom: f64,
    pub shell: Option<(f64, f64)>,
    pub continuous: Option<(f64, &'a RadialTable)>,
}

/// A validated measure ready for density evaluation and sampling.
#[derive(Clone, Debug)]
pub struct Measure {
    spec: MeasureSpec,
    table: Option<RadialTable>,
}

/// Atoms of a measure: `(location, mass)`.
pub type Atom = (Vec<f64>, f64);

impl Measure {
    pub fn new(spec: MeasureSpec) -> Result<Self> {
        spec.validate()?;
        let table = match &spec.kind {
            MeasureKind::RadialDensity { profile, support_radius } => {
                let support = support_radius.or(profile.natural_support());
                Some(RadialTable::new(profile.clone(), spec.dim, support)?)
            }
            MeasureKind::UniformBall { radius } => {
                Some(RadialTable::new(RadialProfile::Power { exponent: 0.0 }, spec.dim, Some(*radius))?)
            }
            MeasureKind::GaussianAniso { scales } if spec.is_radial() => {
                Some(RadialTable::new(RadialProfile::Gaussian { a: scales[0] }, spec.dim, None)?)
            }
            _ => None,
        };
        Ok(Measure { spec, table })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn atoms(&self) -> Vec<Atom> {
        match &self.spec.kind {
            MeasureKind::AtomSphereMix { atom_mass, .. } if *atom_mass > 0.0 => vec![(vec![0.0; self.spec.dim], *atom_mass)],
            _ => Vec::new(),
        }
    }

    /// Mass not carried by atoms.
    pub fn continuous_mass(&self) -> f64 {
        1.0 - self.atoms().iter().map(|a| a.1).sum::<f64>()
    }

    /// Radial decomposition, or `None` for anisotropic Gaussians.
    pub fn radial_parts(&self) -> Option<RadialParts<'_>> {
        match &self.spec.kind {
            MeasureKind::UniformSphere { radius } => Some(RadialParts { origin_atom: 0.0, shell: Some((*radius, 1.0)), continuous: None }),
            MeasureKind::AtomSphereMix { atom_mass, radius } => Some(RadialParts {
                origin_atom: *atom_mass,
                shell: (*atom_mass < 1.0).then_some((*radius, 1.0 - atom_mass)),
                continuous: None,
            }),
            _ => self.table.as_ref().map(|t| RadialParts { origin_atom: 0.0, shell: None, continuous: Some((1.0, t)) }),
        }
    }

    /// Lebesgue density of the absolutely continuous part and the atom list.
    pub fn density(&self, x: &[f64]) -> Result<(f64, Vec<Atom>)> {
        if x.len() != self.spec.dim {
            return Err(invalid("point has wrong dimension"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density point"));
        }
        let n = self.spec.dim;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = match &self.spec.kind {
            MeasureKind::GaussianAniso { scales } => scales
                .iter()
                .zip(x)
                .map(|(a, xi)| (a / PI).sqrt() * (-a * xi * xi).exp())
                .product(),
            MeasureKind::UniformBall { radius } => {
                if r <= *radius {
                    1.0 / (ball_volume(n) * radius.powi(n as i32))
                } else {
                    0.0
                }
            }
            MeasureKind::UniformSphere { .. } | MeasureKind::AtomSphereMix { .. } => 0.0,
            MeasureKind::RadialDensity { .. } => {
                let t = self.table.as_ref().expect("radial table");
                if r > t.rmax() {
                    0.0
                } else {
                    t.profile().eval(r) / (t.norm() * sphere_area(n - 1))
                }
            }
        };
        Ok((d, self.atoms()))
    }

    fn direction(&self, rng: &mut Rng, out: &mut [f64]) {
        loop {
            let mut s = 0.0;
            for v in out.iter_mut() {
                *v = rng.sample(StandardNormal);
                s += *v * *v;
            }
            if s > 1e-300 {
                let inv = 1.0 / s.sqrt();
                out.iter_mut().for_each(|v| *v *= inv);
                return;
            }
        }
    }

    /// Draws one point from the measure conditioned on avoiding the atoms.
    pub fn sample_continuous(&self, rng: &mut Rng, out: &mut [f64]) {
        match &self.spec.kind {
            MeasureKind::GaussianAniso { scales } => {
                for (v, a) in out.iter_mut().zip(scales) {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = z / (2.0 * a).sqrt();
                }
            }
            MeasureKind::UniformSphere { radius } | MeasureKind::AtomSphereMix { radius, .. } => {
                self.direction(rng, out);
                out.iter_mut().for_each(|v| *v *= radius);
            }
            MeasureKind::UniformBall { radius } => {
                self.direction(rng, out);
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / self.spec.dim as f64);
                out.iter_mut().for_each(|v| *v *= r);
            }
            MeasureKind::RadialDensity { .. } => {
                self.direction(rng, out);
                let u: f64 = rng.random();
                let r = self.table.as_ref().expect("radial table").quantile(u);
                out.iter_mut().for_each(|v| *v *= r);
            }
        }
    }

    /// Draws one point from the full measure, atoms included.
    pub fn sample_point(&self, rng: &mut Rng, out: &mut [f64]) {
        if let MeasureKind::AtomSphereMix { atom_mass, .. } = self.spec.kind {
            let u: f64 = rng.random();
            if u < atom_mass {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
        }
        self.sample_continuous(rng, out);
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<SampleBatch> {
        if count == 0 {
            return Err(invalid("sample count must be positive"));
        }
        let n = self.spec.dim;
        let chunks = rng::chunked(count, seed, |rng, len| {
            let mut buf = vec![0.0; len * n];
            for p in buf.chunks_exact_mut(n) {
                self.sample_point(rng, p);
            }
            buf
        });
        Ok(SampleBatch { dim: n, coords: chunks.concat(), weights: None, seed, count })
    }

    /// Scores `count` continuous-part samples with `score` and the atoms exactly.
    pub fn score<F>(&self, count: usize, seed: u64, score: F) -> Scored
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n = self.spec.dim;
        let atoms = self.atoms().into_iter().map(|(x, m)| (score(&x), m)).collect();
        let continuous_mass = self.continuous_mass();
        let values = if continuous_mass > 0.0 {
            rng::chunked(count, seed, |rng, len| {
                let mut p = vec![0.0; n];
                (0..len)
                    .map(|_| {
                        self.sample_continuous(rng, &mut p);
                        score(&p)
                    })
                    .collect::<Vec<_>>()
            })
            .concat()
        } else {
            Vec::new()
        };
        Scored { atoms, continuous_mass, values }
    }

    /// Monte Carlo estimate of the measure of `{x : inside(x)}`.
    pub fn mc_measure<F>(&self, inside: F, count: usize, seed: u64) -> (f64, f64)
    where
        F: Fn(&[f64]) -> bool + Sync,
    {
        self.score(count, seed, |x| if inside(x) { 0.0 } else { 1.0 }).fraction_at_most(0.5)
    }
}

/// Sampled points, stored flat in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub count: usize,
}

impl SampleBatch {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Per-sample scores of the continuous part plus exactly weighted atom scores.
#[derive(Clone, Debug)]
pub struct Scored {
    pub atoms: Vec<(f64, f64)>,
    pub continuous_mass: f64,
    pub values: Vec<f64>,
}

impl Scored {
    /// Estimate and standard error of the mass with score `≤ level`. NaN
    /// scores count as outside.
    pub fn fraction_at_most(&self, level: f64) -> (f64, f64) {
        let exact: f64 = self.atoms.iter().filter(|(s, _)| *s <= level).map(|(_, m)| m).sum();
        if self.values.is_empty() {
            return (exact, 0.0);
        }
        let count = self.values.len() as f64;
        let hits = self.values.iter().filter(|&&s| s <= level).count() as f64;
        let p = hits / count;
        let m = self.continuous_mass;
        (exact + m * p, m * (p * (1.0 - p) / count).sqrt())
    }

    /// Fraction of sampled scores that are NaN.
    pub fn failure_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|v| v.is_nan()).count() as f64 / self.values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_density_at_origin() {
        let m = Measure::new(MeasureSpec::gaussian(vec![1.0])).unwrap();
        let (d, atoms) = m.density(&[0.0]).unwrap();
        assert!((d - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!(atoms.is_empty());
    }

    #[test]
    fn ball_density_outside_is_zero() {
        let m = Measure::new(MeasureSpec::uniform_ball(2, 1.0)).unwrap();
        assert_eq!(m.density(&[2.0, 0.0]).unwrap().0, 0.0);
    }

    #[test]
    fn atom_sphere_density() {
        let m = Measure::new(MeasureSpec::atom_sphere(2, 0.5, 1.0)).unwrap();
        let (d, atoms) = m.density(&[0.3, 0.1]).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(atoms, vec![(vec![0.0, 0.0], 0.5)]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Measure::new(MeasureSpec::gaussian(vec![1.0, -1.0])).is_err());
        let m = Measure::new(MeasureSpec::gaussian(vec![1.0])).unwrap();
        assert_eq!(m.density(&[f64::NAN]), Err(Error::NonFinite("density point")));
    }

    #[test]
    fn non_integrable_profile() {
        let spec = MeasureSpec::radial(2, RadialProfile::Power { exponent: -1.0 }, None);
        assert!(matches!(Measure::new(spec), Err(Error::NonNormalizable(_))));
        let spec = MeasureSpec::radial(2, RadialProfile::Power { exponent: -3.0 }, Some(1.0));
        assert!(matches!(Measure::new(spec), Err(Error::NonNormalizable(_))));
    }

    #[test]
    fn sphere_samples_on_sphere() {
        let m = Measure::new(MeasureSpec::uniform_sphere(2, 1.0)).unwrap();
        let b = m.sample(5000, 3).unwrap();
        for p in b.points() {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn atom_fraction_in_samples() {
        let m = Measure::new(MeasureSpec::atom_sphere(3, 0.5, 1.0)).unwrap();
        let n = 100_000;
        let b = m.sample(n, 11).unwrap();
        let at = b.points().filter(|p| p.iter().all(|&v| v == 0.0)).count() as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((at - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn mc_measure_atoms_exact() {
        let m = Measure::new(MeasureSpec::atom_sphere(2, 0.5, 1.0)).unwrap();
        let (e, s) = m.mc_measure(|x| x[0].hypot(x[1]) <= 0.5, 10_000, 1);
        assert_eq!((e, s), (0.5, 0.0));
    }

    #[test]
    fn mc_measure_disk() {
        let m = Measure::new(MeasureSpec::uniform_ball(2, 1.0)).unwrap();
        let (e, s) = m.mc_measure(|x| x[0].hypot(x[1]) <= 0.5, 200_000, 5);
        assert!((e - 0.25).abs() < 3.0 * s, "{e} {s}");
    }

    #[test]
    fn radial_table_inverts() {
        let t = RadialTable::new(RadialProfile::Gaussian { a: 1.0 }, 3, None).unwrap();
        for &u in &[1e-6, 0.1, 0.5, 0.9, 0.999_999] {
            assert!((t.cdf(t.quantile(u)) - u).abs() < 1e-12);
        }
        // r² e^{-r²} normalized: P(r ≤ 1) = erf(1) - 2/√π e^{-1}
        let exact = statrs::function::erf::erf(1.0) - 2.0 / PI.sqrt() * (-1.0f64).exp();
        assert!((t.cdf(1.0) - exact).abs() < 1e-8);
    }

    #[test]
    fn serde_roundtrip_and_unknown_fields() {
        let spec = MeasureSpec::radial(3, RadialProfile::Exponential { rate: 2.0 }, Some(4.0));
        let s = serde_json::to_string(&spec).unwrap();
        let back: MeasureSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let bad = r#"{"dim":2,"kind":"uniform_ball","radius":1.0,"colour":3}"#;
        assert!(serde_json::from_str::<MeasureSpec>(bad).is_err());
        let bad = r#"{"dim":2,"kind":"gaussian_aniso","scales":[1.0]}"#;
        assert!(serde_json::from_str::<MeasureSpec>(bad).is_err());
    }
}
