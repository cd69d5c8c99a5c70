//! Convex bodies given as half-space systems inside a bounding ball.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{Measure, MeasureKind};
use crate::numeric::barrier::{self, Objective, Options, Problem, Term};
use crate::numeric::quadrature::{integrate, integrate_pieces};
use crate::numeric::special::normal_cdf;
use crate::rng::{self, Rng};

/// `⟨normal, x⟩ ≤ offset` with a unit normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(Vec<f64>, f64)", into = "(Vec<f64>, f64)")]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl From<(Vec<f64>, f64)> for Halfspace {
    fn from((normal, offset): (Vec<f64>, f64)) -> Self {
        Halfspace { normal, offset }
    }
}

impl From<Halfspace> for (Vec<f64>, f64) {
    fn from(h: Halfspace) -> Self {
        (h.normal, h.offset)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `{x : |x| ≤ radius, ⟨u_i, x⟩ ≤ c_i for all i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    pub dim: usize,
    pub radius: f64,
    pub halfspaces: Vec<Halfspace>,
}

/// Ellipsoid `{center + shape·v : |v| ≤ 1}` with symmetric `shape`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    /// Semiaxis lengths, largest first.
    pub semiaxes: Vec<f64>,
    /// Unit axis directions matching `semiaxes`.
    pub axes: Vec<DVector<f64>>,
}

/// `base + span(basis)` with an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFlat {
    pub base: DVector<f64>,
    pub basis: Vec<DVector<f64>>,
}

impl AffineFlat {
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut v = DVector::from_column_slice(x) - &self.base;
        for b in &self.basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        v.norm()
    }
}

impl ConvexBody {
    pub fn new(dim: usize, radius: f64, halfspaces: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("bounding radius must be positive"));
        }
        let mut body = ConvexBody { dim, radius, halfspaces: Vec::with_capacity(halfspaces.len()) };
        for (u, c) in halfspaces {
            body = body.with_cut(&u, c)?;
        }
        Ok(body)
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, radius, Vec::new())
    }

    /// Axis-aligned box `[lo_i, hi_i]` inside `B(radius)`.
    pub fn aligned_box(lo: &[f64], hi: &[f64], radius: f64) -> Result<Self> {
        let n = lo.len();
        let mut hs = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            if hi[i].is_finite() {
                hs.push((e.clone(), hi[i]));
            }
            e[i] = -1.0;
            if lo[i].is_finite() {
                hs.push((e, -lo[i]));
            }
        }
        Self::new(n, radius, hs)
    }

    /// Adds `⟨u, x⟩ ≤ c`, normalizing `u`.
    pub fn with_cut(&self, u: &[f64], c: f64) -> Result<Self> {
        if u.len() != self.dim {
            return Err(invalid("half-space normal has wrong dimension"));
        }
        let nu = norm(u);
        if !(nu.is_finite() && nu > 0.0 && c.is_finite()) {
            return Err(invalid("half-space needs a nonzero finite normal and finite offset"));
        }
        let mut out = self.clone();
        out.halfspaces.push(Halfspace { normal: u.iter().map(|v| v / nu).collect(), offset: c / nu });
        Ok(out)
    }

    /// The body moved by `v`, with the bounding ball enlarged to `R + |v|`.
    /// Exact when the original ball constraint is inactive.
    pub fn translated(&self, v: &[f64]) -> Self {
        let mut out = self.clone();
        for h in &mut out.halfspaces {
            h.offset += dot(&h.normal, v);
        }
        out.radius = self.radius + norm(v);
        out
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        norm(x) <= self.radius + tol && self.halfspaces.iter().all(|h| dot(&h.normal, x) <= h.offset + tol)
    }

    /// Smallest slack of `x` over the ball and all half-spaces.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.offset - dot(&h.normal, x))
            .fold(self.radius - norm(x), f64::min)
    }

    fn ball_term(&self, vars: usize) -> Term {
        let mut jac = DMatrix::zeros(self.dim, vars);
        for i in 0..self.dim {
            jac[(i, i)] = 1.0;
        }
        Term::Quadratic { coef: DVector::zeros(vars), offset: self.radius * self.radius, jac, shift: DVector::zeros(self.dim) }
    }

    /// A point of maximal (scaled) slack and its true margin. Errors when the
    /// interior is empty.
    pub fn interior_point(&self) -> Result<(DVector<f64>, f64)> {
        let n = self.dim;
        let r = self.radius;
        let vars = n + 1;
        let mut terms = Vec::with_capacity(self.halfspaces.len() + 2);
        for h in &self.halfspaces {
            let mut coef = DVector::zeros(vars);
            coef.rows_mut(0, n).copy_from_slice(&h.normal);
            coef[n] = -1.0;
            terms.push(Term::Linear { coef, offset: h.offset });
        }
        let mut jac = DMatrix::zeros(n, vars);
        for i in 0..n {
            jac[(i, i)] = 1.0;
        }
        let mut coef = DVector::zeros(vars);
        coef[n] = -2.0 * r;
        terms.push(Term::Quadratic { coef, offset: r * r, jac, shift: DVector::zeros(n) });
        let mut coef = DVector::zeros(vars);
        coef[n] = -1.0;
        terms.push(Term::Linear { coef, offset: r + 1.0 });
        let mut obj = DVector::zeros(vars);
        obj[n] = 1.0;
        let s0 = self.halfspaces.iter().map(|h| -h.offset).fold(-0.5 * r, f64::max).max(0.0) + 1.0;
        let mut z0 = DVector::zeros(vars);
        z0[n] = s0;
        let problem = Problem { dim: vars, objective: Objective::Linear(obj), terms };
        let sol = barrier::solve(&problem, z0, Options { gap: 1e-9 * r.max(1.0), ..Options::default() })?;
        let x = sol.z.rows(0, n).into_owned();
        let margin = self.margin(x.as_slice());
        if margin <= 1e-10 * r {
            return Err(Error::Degenerate("body has empty interior".into()));
        }
        Ok((x, margin))
    }

    /// `max ⟨u, x⟩` over the body.
    pub fn support(&self, u: &[f64]) -> Result<f64> {
        let (x0, _) = self.interior_point()?;
        self.support_from(u, &x0)
    }

    fn support_from(&self, u: &[f64], x0: &DVector<f64>) -> Result<f64> {
        let n = self.dim;
        let mut terms: Vec<Term> = self
            .halfspaces
            .iter()
            .map(|h| Term::Linear { coef: DVector::from_column_slice(&h.normal), offset: h.offset })
            .collect();
        terms.push(self.ball_term(n));
        let obj = -DVector::from_column_slice(u);
        let problem = Problem { dim: n, objective: Objective::Linear(obj), terms };
        let scale = norm(u).max(1e-300) * self.radius.max(1.0);
        let sol = barrier::solve(&problem, x0.clone(), Options { gap: 1e-11 * scale, ..Options::default() })?;
        Ok(-sol.objective)
    }

    /// `max⟨u,x⟩ − min⟨u,x⟩` over the body.
    pub fn directional_width(&self, u: &[f64]) -> Result<f64> {
        let (x0, _) = self.interior_point()?;
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        Ok(self.support_from(u, &x0)? + self.support_from(&neg, &x0)?)
    }

    /// Maximum-volume inscribed ellipsoid.
    pub fn john_ellipsoid(&self) -> Result<Ellipsoid> {
        let n = self.dim;
        let r = self.radius;
        let (x0, margin) = self.interior_point()?;
        let ne = n * (n + 1) / 2;
        let vars = ne + n + 1;
        let mu = ne + n;
        // vech basis for E
        let mut sym = Vec::with_capacity(ne);
        for i in 0..n {
            for j in i..n {
                let mut m = DMatrix::zeros(n, n);
                m[(i, j)] = 1.0;
                m[(j, i)] = 1.0;
                sym.push((i, j, m));
            }
        }
        let mut obj_parts: Vec<DMatrix<f64>> = sym.iter().map(|s| s.2.clone()).collect();
        obj_parts.resize(vars, DMatrix::zeros(n, n));
        let objective = Objective::NegLogDet { base: DMatrix::zeros(n, n), parts: obj_parts };

        let mut terms = Vec::new();
        for h in &self.halfspaces {
            // |E a| + ⟨a, d⟩ ≤ c
            let mut coef = DVector::zeros(vars);
            for i in 0..n {
                coef[ne + i] = h.normal[i];
            }
            let mut jac = DMatrix::zeros(n, vars);
            for (p, (i, j, _)) in sym.iter().enumerate() {
                jac[(*i, p)] += h.normal[*j];
                if i != j {
                    jac[(*j, p)] += h.normal[*i];
                }
            }
            terms.push(Term::Cone { coef, offset: h.offset, jac });
        }
        // E·B + d ⊆ B(R):  [[R I, E, d], [E, μ I, 0], [dᵀ, 0, R − μ]] ⪰ 0
        let size = 2 * n + 1;
        let mut base = DMatrix::zeros(size, size);
        for i in 0..n {
            base[(i, i)] = r;
        }
        base[(2 * n, 2 * n)] = r;
        let mut parts = vec![DMatrix::zeros(size, size); vars];
        for (p, (i, j, _)) in sym.iter().enumerate() {
            let m = &mut parts[p];
            m[(*i, n + *j)] = 1.0;
            m[(n + *j, *i)] = 1.0;
            m[(*j, n + *i)] = 1.0;
            m[(n + *i, *j)] = 1.0;
        }
        for i in 0..n {
            let m = &mut parts[ne + i];
            m[(i, 2 * n)] = 1.0;
            m[(2 * n, i)] = 1.0;
        }
        for i in 0..n {
            parts[mu][(n + i, n + i)] = 1.0;
        }
        parts[mu][(2 * n, 2 * n)] = -1.0;
        terms.push(Term::LogDet { base, parts });

        let problem = Problem { dim: vars, objective, terms };
        let mut e = 0.5 * margin;
        let mut start = None;
        'search: for _ in 0..60 {
            for s in 1..40 {
                let mu_val = r * 0.5f64.powi(s);
                let mut z = DVector::zeros(vars);
                for (p, (i, j, _)) in sym.iter().enumerate() {
                    if i == j {
                        z[p] = e;
                    }
                }
                for i in 0..n {
                    z[ne + i] = x0[i];
                }
                z[mu] = mu_val;
                if problem.is_interior(&z) {
                    start = Some(z);
                    break 'search;
                }
            }
            e *= 0.5;
        }
        let z0 = start.ok_or_else(|| Error::Degenerate("no strictly feasible ellipsoid found".into()))?;
        let sol = barrier::solve(&problem, z0, Options { gap: 1e-9, ..Options::default() })?;
        let mut shape = DMatrix::zeros(n, n);
        for (p, (i, j, _)) in sym.iter().enumerate() {
            shape[(*i, *j)] = sol.z[p];
            shape[(*j, *i)] = sol.z[p];
        }
        let center = sol.z.rows(ne, n).into_owned();
        Ok(Ellipsoid::from_shape(center, shape))
    }

    /// Upper bound on the Minkowski gauge of `x` for a body containing the
    /// origin in its interior.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        let mut g = norm(x) / self.radius;
        for h in &self.halfspaces {
            if h.offset <= 0.0 {
                return Err(invalid("gauge needs the origin in the interior"));
            }
            g = g.max(dot(&h.normal, x) / h.offset);
        }
        Ok(g)
    }

    /// Axis-aligned bounding box of the body.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (x0, _) = self.interior_point()?;
        let n = self.dim;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            hi[i] = self.support_from(&e, &x0)?.min(self.radius);
            e[i] = -1.0;
            lo[i] = (-self.support_from(&e, &x0)?).max(-self.radius);
        }
        Ok((lo, hi))
    }

    /// Uniform points in the body by rejection from its bounding box.
    pub fn sample_uniform(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let (lo, hi) = self.bounding_box()?;
        let n = self.dim;
        let chunks = rng::chunked(count, seed, |rng: &mut Rng, len| {
            let mut out = Vec::with_capacity(len);
            let mut p = vec![0.0; n];
            while out.len() < len {
                for i in 0..n {
                    p[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
                }
                if self.contains(&p, 0.0) {
                    out.push(p.clone());
                }
            }
            out
        });
        Ok(chunks.concat())
    }

    /// Checks `body ⊆ center + n·(E − center)` along facet normals and the
    /// ellipsoid axes.
    pub fn john_sandwich_holds(&self, e: &Ellipsoid, tol: f64) -> Result<bool> {
        let n = self.dim as f64;
        let (x0, _) = self.interior_point()?;
        let mut dirs: Vec<DVector<f64>> = self.halfspaces.iter().map(|h| DVector::from_column_slice(&h.normal)).collect();
        for a in &e.axes {
            dirs.push(a.clone());
            dirs.push(-a);
        }
        for d in dirs {
            let h = self.support_from(d.as_slice(), &x0)?;
            let allowed = d.dot(&e.center) + n * (&e.shape * &d).norm();
            if h > allowed + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl Ellipsoid {
    pub fn from_shape(center: DVector<f64>, shape: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(shape.clone());
        let mut idx: Vec<usize> = (0..center.len()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
        let semiaxes = idx.iter().map(|&i| eig.eigenvalues[i].abs()).collect();
        let axes = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        Ellipsoid { center, shape, semiaxes, axes }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let v = DVector::from_column_slice(x) - &self.center;
        match self.shape.clone().cholesky() {
            Some(ch) => ch.solve(&v).norm() <= 1.0 + tol,
            None => false,
        }
    }
}

/// Closeness of a body to the flat through its John center along the top-k
/// John axes.
#[derive(Clone, Debug)]
pub struct Deficiency {
    /// `n` times the `(k+1)`-th largest John semiaxis.
    pub delta: f64,
    pub flat: AffineFlat,
    /// `sqrt(Σ h_j²)` where `h_j` is the largest `|⟨b_j, x − center⟩|` over
    /// the body along each orthogonal John axis `b_j`; bounds the distance of
    /// every body point to the flat.
    pub measured: f64,
    pub ellipsoid: Ellipsoid,
}

pub fn pancake_deficiency(body: &ConvexBody, k: usize) -> Result<Deficiency> {
    let n = body.dim;
    if k > n {
        return Err(invalid("flat dimension exceeds ambient dimension"));
    }
    let e = body.john_ellipsoid()?;
    let delta = if k == n { 0.0 } else { n as f64 * e.semiaxes[k] };
    let flat = AffineFlat { base: e.center.clone(), basis: e.axes[..k].to_vec() };
    let (x0, _) = body.interior_point()?;
    let mut sq = 0.0;
    for b in &e.axes[k..] {
        let up = body.support_from(b.as_slice(), &x0)? - b.dot(&e.center);
        let neg = -b;
        let down = body.support_from(neg.as_slice(), &x0)? + b.dot(&e.center);
        let h = up.max(down).max(0.0);
        sq += h * h;
    }
    Ok(Deficiency { delta, flat, measured: sq.sqrt(), ellipsoid: e })
}

/// Cell of `site` in the Voronoi diagram of `sites`, intersected with `ambient`.
pub fn voronoi_cell(site: &[f64], sites: &[Vec<f64>], ambient: &ConvexBody) -> Result<ConvexBody> {
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            if a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12) {
                return Err(invalid("duplicate Voronoi sites"));
            }
        }
    }
    if !sites.iter().any(|s| s.as_slice() == site) {
        return Err(invalid("site is not among the sites"));
    }
    let mut cell = ambient.clone();
    for other in sites.iter().filter(|s| s.as_slice() != site) {
        let diff: Vec<f64> = other.iter().zip(site).map(|(a, b)| a - b).collect();
        let c = 0.5 * (dot(other, other) - dot(site, site));
        cell = cell.with_cut(&diff, c)?;
    }
    Ok(cell)
}

/// Evaluates measures of bodies and equal-measure cuts: exactly for `n ≤ 2`
/// and on a fixed antithetic point cloud for `n ≥ 3`.
#[derive(Clone, Debug)]
pub struct MassOracle {
    measure: Measure,
    cloud: Option<Vec<f64>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Moment {
    Mass,
    X,
    Y,
}

/// Point-cloud size used for `n ≥ 3`.
pub const CLOUD_POINTS: usize = 1 << 17;

impl MassOracle {
    pub fn new(measure: Measure, seed: u64) -> Result<Self> {
        match measure.spec().kind {
            MeasureKind::UniformSphere { .. } | MeasureKind::AtomSphereMix { .. } => {
                return Err(Error::Unsupported("cuts need an absolutely continuous measure".into()));
            }
            _ => {}
        }
        let n = measure.dim();
        let cloud = if n >= 3 {
            let half = measure.sample(CLOUD_POINTS / 2, seed)?;
            let mut pts = Vec::with_capacity(CLOUD_POINTS * n);
            for p in half.points() {
                pts.extend_from_slice(p);
                pts.extend(p.iter().map(|v| -v));
            }
            Some(pts)
        } else {
            None
        };
        Ok(MassOracle { measure, cloud })
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    /// Measure of the body (unnormalized by the body, normalized for the measure).
    pub fn mass(&self, body: &ConvexBody) -> Result<f64> {
        if body.dim != self.measure.dim() {
            return Err(invalid("body and measure dimensions differ"));
        }
        match body.dim {
            1 => Ok(self.mass_1d(body)),
            2 => Ok(self.mass_2d(body)),
            _ => {
                let n = body.dim;
                let cloud = self.cloud.as_ref().expect("cloud for n >= 3");
                let hits = cloud.chunks_exact(n).filter(|p| body.contains(p, 0.0)).count();
                Ok(hits as f64 / (cloud.len() / n) as f64)
            }
        }
    }

    fn cdf_1d(&self, x: f64) -> f64 {
        match &self.measure.spec().kind {
            MeasureKind::GaussianAniso { scales } => normal_cdf(x * (2.0 * scales[0]).sqrt()),
            MeasureKind::UniformBall { radius } => ((x + radius) / (2.0 * radius)).clamp(0.0, 1.0),
            _ => {
                let t = self.measure.radial_parts().and_then(|p| p.continuous).expect("radial table").1;
                0.5 + 0.5 * x.signum() * t.cdf(x.abs())
            }
        }
    }

    fn interval_1d(body: &ConvexBody) -> (f64, f64) {
        let mut lo = -body.radius;
        let mut hi = body.radius;
        for h in &body.halfspaces {
            let u = h.normal[0];
            if u > 0.0 {
                hi = hi.min(h.offset / u);
            } else if u < 0.0 {
                lo = lo.max(h.offset / u);
            } else if h.offset < 0.0 {
                return (0.0, 0.0);
            }
        }
        (lo, hi)
    }

    fn mass_1d(&self, body: &ConvexBody) -> f64 {
        let (lo, hi) = Self::interval_1d(body);
        if hi <= lo {
            return 0.0;
        }
        (self.cdf_1d(hi) - self.cdf_1d(lo)).max(0.0)
    }

    /// x-range of the vertical chord at abscissa `s`.
    fn chord(body: &ConvexBody, s: f64) -> Option<(f64, f64)> {
        let r = body.radius;
        if s.abs() >= r {
            return None;
        }
        let w = (r * r - s * s).sqrt();
        let (mut lo, mut hi) = (-w, w);
        for h in &body.halfspaces {
            let (u1, u2) = (h.normal[0], h.normal[1]);
            let rest = h.offset - u1 * s;
            if u2.abs() < 1e-15 {
                if rest < 0.0 {
                    return None;
                }
            } else if u2 > 0.0 {
                hi = hi.min(rest / u2);
            } else {
                lo = lo.max(rest / u2);
            }
        }
        (hi > lo).then_some((lo, hi))
    }

    /// Abscissae where the chord length can have a kink.
    fn breakpoints_2d(body: &ConvexBody) -> Vec<f64> {
        let r = body.radius;
        let mut xs = vec![-r, r];
        let hs = &body.halfspaces;
        for (i, a) in hs.iter().enumerate() {
            // line-circle
            let (u1, u2, c) = (a.normal[0], a.normal[1], a.offset);
            let disc = r * r - c * c;
            if disc >= 0.0 {
                let d = disc.sqrt();
                xs.push(c * u1 + d * u2);
                xs.push(c * u1 - d * u2);
            }
            for b in &hs[i + 1..] {
                let det = u1 * b.normal[1] - u2 * b.normal[0];
                if det.abs() > 1e-14 {
                    xs.push((c * b.normal[1] - u2 * b.offset) / det);
                }
            }
        }
        // Extent of the body: candidate points inside it.
        let inside: Vec<f64> = xs
            .iter()
            .copied()
            .filter(|&x| x.abs() <= r && Self::chord(body, x.clamp(-r * (1.0 - 1e-15), r * (1.0 - 1e-15))).is_some())
            .collect();
        let mut out: Vec<f64> = xs.into_iter().filter(|x| x.is_finite()).map(|x| x.clamp(-r, r)).collect();
        out.extend(inside);
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        out
    }

    fn mass_2d(&self, body: &ConvexBody) -> f64 {
        self.integrate_2d(body, Moment::Mass).max(0.0)
    }

    /// `∫_body w dμ` for `w ∈ {1, x, y}` by quadrature over vertical chords.
    fn integrate_2d(&self, body: &ConvexBody, moment: Moment) -> f64 {
        let breaks = Self::breakpoints_2d(body);
        let spec = self.measure.spec();
        let inner: Box<dyn Fn(f64, f64, f64) -> f64> = match &spec.kind {
            MeasureKind::GaussianAniso { scales } => {
                let (a1, a2) = (scales[0], scales[1]);
                let c1 = (a1 / PI).sqrt();
                let s2 = (2.0 * a2).sqrt();
                Box::new(move |s, lo, hi| {
                    let along = if moment == Moment::Y {
                        ((-a2 * lo * lo).exp() - (-a2 * hi * hi).exp()) / (2.0 * (a2 * PI).sqrt())
                    } else {
                        let (p, q) = (lo * s2, hi * s2);
                        // difference of normal CDFs evaluated on the small-tail side
                        if p >= 0.0 {
                            normal_cdf(-p) - normal_cdf(-q)
                        } else if q <= 0.0 {
                            normal_cdf(q) - normal_cdf(p)
                        } else {
                            1.0 - normal_cdf(-q) - normal_cdf(p)
                        }
                    };
                    let w = if moment == Moment::X { s } else { 1.0 };
                    w * c1 * (-a1 * s * s).exp() * along
                })
            }
            MeasureKind::UniformBall { radius } => {
                let area = PI * radius * radius;
                let rr = *radius;
                Box::new(move |s, lo, hi| {
                    let w = (rr * rr - s * s).max(0.0).sqrt();
                    let (lo, hi) = (lo.max(-w), hi.min(w));
                    if hi <= lo {
                        return 0.0;
                    }
                    match moment {
                        Moment::Mass => (hi - lo) / area,
                        Moment::X => s * (hi - lo) / area,
                        Moment::Y => 0.5 * (hi * hi - lo * lo) / area,
                    }
                })
            }
            _ => {
                let measure = self.measure.clone();
                Box::new(move |s, lo, hi| {
                    let v = integrate(
                        |y| {
                            let d = measure.density(&[s, y]).map(|d| d.0).unwrap_or(0.0);
                            if moment == Moment::Y {
                                y * d
                            } else {
                                d
                            }
                        },
                        lo,
                        hi,
                        1e-15,
                        1e-12,
                    )
                    .value;
                    if moment == Moment::X {
                        s * v
                    } else {
                        v
                    }
                })
            }
        };
        integrate_pieces(
            |s| match Self::chord(body, s) {
                Some((lo, hi)) => inner(s, lo, hi),
                None => 0.0,
            },
            &breaks,
            1e-14,
        )
        .value
    }

    /// Measure of the body and its barycenter under the measure.
    pub fn moments(&self, body: &ConvexBody) -> Result<(f64, Vec<f64>)> {
        let mass = self.mass(body)?;
        if !(mass > 1e-300) {
            return Err(Error::Degenerate("degenerate: body has zero measure".into()));
        }
        let n = body.dim;
        let mean = match n {
            1 => {
                let (lo, hi) = Self::interval_1d(body);
                let m = &self.measure;
                vec![integrate(|x| x * m.density(&[x]).map(|d| d.0).unwrap_or(0.0), lo, hi, 1e-15, 1e-12).value / mass]
            }
            2 => vec![self.integrate_2d(body, Moment::X) / mass, self.integrate_2d(body, Moment::Y) / mass],
            _ => {
                let cloud = self.cloud.as_ref().expect("cloud for n >= 3");
                let mut sum = vec![0.0; n];
                let mut hits = 0usize;
                for p in cloud.chunks_exact(n).filter(|p| body.contains(p, 0.0)) {
                    hits += 1;
                    sum.iter_mut().zip(p).for_each(|(a, b)| *a += b);
                }
                sum.iter().map(|v| v / hits as f64).collect()
            }
        };
        Ok((mass, mean))
    }

    /// Offset `c` with `μ(body ∩ {⟨u,x⟩ ≤ c}) = fraction·μ(body)` to relative
    /// tolerance `tol`.
    pub fn equal_measure_cut(&self, body: &ConvexBody, u: &[f64], fraction: f64, tol: f64) -> Result<f64> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(invalid("cut fraction must lie in (0, 1)"));
        }
        let nu = norm(u);
        if (nu - 1.0).abs() > 1e-9 {
            return Err(invalid("cut direction must be a unit vector"));
        }
        let total = self.mass(body)?;
        if !(total > 1e-300) {
            return Err(Error::Degenerate("degenerate: body has zero measure".into()));
        }
        if let Some(cloud) = &self.cloud {
            // Exact quantile of the empirical measure.
            let n = body.dim;
            let mut proj: Vec<f64> =
                cloud.chunks_exact(n).filter(|p| body.contains(p, 0.0)).map(|p| dot(p, u)).collect();
            proj.sort_by(f64::total_cmp);
            let m = proj.len();
            let j = ((fraction * m as f64).round() as usize).clamp(1, m - 1);
            return Ok(0.5 * (proj[j - 1] + proj[j]));
        }
        let target = fraction * total;
        let mut lo = -body.radius;
        let mut hi = body.radius;
        let mut best = (f64::INFINITY, 0.0);
        for _ in 0..200 {
            let c = 0.5 * (lo + hi);
            let m = self.mass(&body.with_cut(u, c)?)?;
            let err = m - target;
            if err.abs() < best.0 {
                best = (err.abs(), c);
            }
            if err.abs() <= tol * total {
                return Ok(c);
            }
            if err > 0.0 {
                hi = c;
            } else {
                lo = c;
            }
            if hi - lo <= 1e-15 * body.radius {
                return Ok(c);
            }
        }
        Err(Error::NotConverged { iterations: 200, best: format!("bracket [{lo}, {hi}], offset {}", best.1) })
    }
}
