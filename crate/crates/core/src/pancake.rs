//! Binary equal-measure partitions of `B(R)`, equalization of a functional
//! over the parts, and pancake certification of the leaves.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::convex::{pancake_deficiency, ConvexBody, MassOracle};
use crate::error::{invalid, Error, Result};
use crate::measures::MeasureKind;
use crate::numeric::optimize::{illinois, nelder_mead};
use crate::rng;

/// Orthonormal frame of a linear subspace, one vector per column.
pub type Frame = Vec<DVector<f64>>;

/// `count` independent uniformly distributed `(n-k-1)`-dimensional frames.
pub fn subspace_sequence(n: usize, k: usize, count: usize, seed: u64) -> Result<Vec<Frame>> {
    if k == 0 || k >= n {
        return Err(invalid("need 1 <= k < n"));
    }
    let m = n - k - 1;
    let mut rng = rng::aux_stream(seed, 0x5eb5);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if m == 0 {
            out.push(Vec::new());
            continue;
        }
        let g = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let q = qr.q();
        let r = qr.r();
        // Sign fix makes the frame Haar distributed.
        out.push((0..m).map(|j| q.column(j) * r[(j, j)].signum()).collect());
    }
    Ok(out)
}

/// Orthonormal basis of the orthogonal complement of `frame` in `R^n`, as the
/// columns of an `n × (n − frame.len())` matrix.
pub fn complement_basis(frame: &Frame, n: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = frame.clone();
    let mut extra = Vec::new();
    while basis.len() < n {
        // Pick the coordinate vector with the largest residual.
        let mut best: Option<DVector<f64>> = None;
        for i in 0..n {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
            if best.as_ref().is_none_or(|w| v.norm() > w.norm()) {
                best = Some(v);
            }
        }
        let v = best.expect("n > 0");
        let v = &v / v.norm();
        basis.push(v.clone());
        extra.push(v);
    }
    DMatrix::from_columns(&extra)
}

fn level_of(node: usize) -> usize {
    (usize::BITS - 1 - (node + 1).leading_zeros()) as usize
}

/// Directions and offsets of a full binary cut hierarchy, in level order
/// (children of node `j` are `2j+1` and `2j+2`).
#[derive(Clone, Debug, PartialEq)]
pub struct CutTree {
    pub n: usize,
    pub k: usize,
    pub depth: usize,
    pub frames: Vec<Frame>,
    pub directions: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl CutTree {
    /// Checks unit length and orthogonality of every node direction to its
    /// level's subspace.
    pub fn validate(&self) -> Result<()> {
        let nodes = (1usize << self.depth) - 1;
        if self.directions.len() != nodes {
            return Err(invalid(format!("expected {nodes} directions, got {}", self.directions.len())));
        }
        for (j, u) in self.directions.iter().enumerate() {
            let u = DVector::from_column_slice(u);
            if u.len() != self.n || (u.norm() - 1.0).abs() > 1e-10 {
                return Err(invalid(format!("direction {j} is not a unit vector in R^{}", self.n)));
            }
            if let Some(frame) = self.frames.get(level_of(j)) {
                if frame.iter().any(|b| b.dot(&u).abs() > 1e-10) {
                    return Err(invalid(format!("direction {j} is not orthogonal to its level subspace")));
                }
            }
        }
        Ok(())
    }
}

/// Leaves and bookkeeping of a cut hierarchy.
#[derive(Clone, Debug)]
pub struct PartitionResult {
    pub depth: usize,
    pub directions: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    /// Every node body in level order; the last `2^depth` are the leaves.
    pub nodes: Vec<ConvexBody>,
    /// Leaf masses relative to `μ(B(R))`.
    pub masses: Vec<f64>,
    pub f_values: Vec<Vec<f64>>,
    pub spread: f64,
}

impl PartitionResult {
    pub fn leaves(&self) -> &[ConvexBody] {
        &self.nodes[(1 << self.depth) - 1..]
    }

    /// Largest relative deviation of a leaf mass from `1/N`.
    pub fn mass_deviation(&self) -> f64 {
        let target = 1.0 / self.masses.len() as f64;
        self.masses.iter().map(|m| (m - target).abs() / target).fold(0.0, f64::max)
    }
}

/// Largest pairwise distance among the vectors.
pub fn spread(values: &[Vec<f64>]) -> f64 {
    let mut s: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            s = s.max(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    s
}

/// Cuts `B(R)` recursively, each node at `⟨u, x⟩ = c` with `c` splitting its
/// measure in half; the left child is `⟨u, x⟩ ≤ c`.
pub fn build_partition(oracle: &MassOracle, radius: f64, depth: usize, directions: &[Vec<f64>], tol: f64) -> Result<PartitionResult> {
    let n = oracle.measure().dim();
    let inner = (1usize << depth) - 1;
    if directions.len() != inner {
        return Err(invalid(format!("expected {inner} directions, got {}", directions.len())));
    }
    let root = ConvexBody::ball(n, radius)?;
    let total = oracle.mass(&root)?;
    let mut nodes = vec![root];
    let mut offsets = Vec::with_capacity(inner);
    for (j, u) in directions.iter().enumerate() {
        let body = nodes[j].clone();
        let c = oracle.equal_measure_cut(&body, u, 0.5, tol)?;
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        nodes.push(body.with_cut(u, c)?);
        nodes.push(body.with_cut(&neg, -c)?);
        offsets.push(c);
    }
    let masses = nodes[inner..].iter().map(|b| oracle.mass(b).map(|m| m / total)).collect::<Result<Vec<_>>>()?;
    Ok(PartitionResult { depth, directions: directions.to_vec(), offsets, nodes, masses, f_values: Vec::new(), spread: 0.0 })
}

/// A functional on convex bodies.
pub type Functional<'a> = dyn Fn(&ConvexBody) -> Result<Vec<f64>> + Sync + 'a;

/// Memoizes a functional on bodies keyed by quantized half-space data.
pub struct CachedFunctional<'a> {
    f: &'a Functional<'a>,
    quantum: f64,
    cache: Mutex<HashMap<Vec<i64>, Vec<f64>>>,
    evaluations: AtomicUsize,
}

impl<'a> CachedFunctional<'a> {
    pub fn new(f: &'a Functional<'a>, quantum: f64) -> Self {
        CachedFunctional { f, quantum, cache: Mutex::new(HashMap::new()), evaluations: AtomicUsize::new(0) }
    }

    fn key(&self, body: &ConvexBody) -> Vec<i64> {
        let mut hs: Vec<Vec<i64>> = body
            .halfspaces
            .iter()
            .map(|h| h.normal.iter().chain(std::iter::once(&h.offset)).map(|v| (v / self.quantum).round() as i64).collect())
            .collect();
        hs.sort();
        let mut key = vec![(body.radius / self.quantum).round() as i64];
        key.extend(hs.into_iter().flatten());
        key
    }

    pub fn eval(&self, body: &ConvexBody) -> Result<Vec<f64>> {
        let key = self.key(body);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let v = (self.f)(body)?;
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    /// Number of uncached evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EqualizeOptions {
    /// Declared spread tolerance.
    pub target: f64,
    /// Nelder–Mead evaluation budget (whole search).
    pub budget: usize,
    pub starts: usize,
    /// Relative mass tolerance for each cut.
    pub cut_tol: f64,
    /// Cache key resolution for the functional.
    pub cache_quantum: f64,
}

impl Default for EqualizeOptions {
    fn default() -> Self {
        EqualizeOptions { target: 1e-3, budget: 10_000, starts: 64, cut_tol: 1e-10, cache_quantum: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqualizeMethod {
    /// Nested antipodal root-finding (k = 1).
    Antipodal,
    /// Multi-start Nelder–Mead over products of spheres.
    MultiStart,
}

#[derive(Clone, Debug)]
pub struct Equalized {
    pub tree: CutTree,
    pub result: PartitionResult,
    pub spread: f64,
    pub converged: bool,
    pub method: EqualizeMethod,
    pub evaluations: usize,
}

struct Ctx<'a, 'b> {
    oracle: &'a MassOracle,
    f: &'a CachedFunctional<'b>,
    depth: usize,
    bases: Vec<DMatrix<f64>>,
    opts: EqualizeOptions,
}

impl Ctx<'_, '_> {
    fn direction(&self, level: usize, w: &[f64]) -> Vec<f64> {
        let b = &self.bases[level];
        let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let u = b * DVector::from_iterator(w.len(), w.iter().map(|v| v / nw));
        let nu = u.norm();
        u.iter().map(|v| v / nu).collect()
    }

    fn split(&self, body: &ConvexBody, u: &[f64]) -> Result<(ConvexBody, ConvexBody)> {
        let c = self.oracle.equal_measure_cut(body, u, 0.5, self.opts.cut_tol)?;
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        Ok((body.with_cut(u, c)?, body.with_cut(&neg, -c)?))
    }

    /// Equalizes the subtree rooted at `node`; returns node → angle and the
    /// common value of the subtree (mean of its two halves).
    fn solve(&self, body: &ConvexBody, node: usize) -> Result<(HashMap<usize, f64>, f64)> {
        let level = level_of(node);
        if level == self.depth {
            return Ok((HashMap::new(), self.f.eval(body)?[0]));
        }
        let eval = |phi: f64| -> Result<(f64, HashMap<usize, f64>, f64)> {
            let u = self.direction(level, &[phi.cos(), phi.sin()]);
            let (l, r) = self.split(body, &u)?;
            let (mut al, vl) = self.solve(&l, 2 * node + 1)?;
            let (ar, vr) = self.solve(&r, 2 * node + 2)?;
            al.extend(ar);
            al.insert(node, phi);
            Ok((vl - vr, al, 0.5 * (vl + vr)))
        };
        let (h0, a0, v0) = eval(0.0)?;
        // Leaf spread is at most the sum of per-level imbalances.
        let tol = self.opts.target * 0.1 / self.depth as f64;
        if h0.abs() <= tol {
            return Ok((a0, v0));
        }
        // Swapping the halves flips the sign: h(π) = −h(0).
        let mut failure = None;
        let (phi, _) = illinois(
            |phi| match eval(phi) {
                Ok((h, _, _)) => h,
                Err(e) => {
                    failure = Some(e);
                    f64::NAN
                }
            },
            0.0,
            h0,
            std::f64::consts::PI,
            -h0,
            tol,
            1e-12,
            80,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let (_, a, v) = eval(phi)?;
        Ok((a, v))
    }
}

/// Searches for cut directions making the functional equal on all leaves.
pub fn equalize_f(
    oracle: &MassOracle,
    radius: f64,
    f: &Functional<'_>,
    k: usize,
    depth: usize,
    frames: &[Frame],
    seed: u64,
    opts: EqualizeOptions,
) -> Result<Equalized> {
    let n = oracle.measure().dim();
    if depth > 4 {
        return Err(invalid("equalization supports at most 16 parts"));
    }
    if frames.len() < depth || frames.iter().take(depth).any(|fr| fr.len() + k + 1 != n) {
        return Err(invalid("need one (n-k-1)-frame per level"));
    }
    let cached = CachedFunctional::new(f, opts.cache_quantum);
    let ctx = Ctx {
        oracle,
        f: &cached,
        depth,
        bases: frames.iter().take(depth).map(|fr| complement_basis(fr, n)).collect(),
        opts,
    };
    let tree_of = |dirs: Vec<Vec<f64>>, result: &PartitionResult| CutTree {
        n,
        k,
        depth,
        frames: frames[..depth].to_vec(),
        directions: dirs,
        offsets: result.offsets.clone(),
    };
    let finish = |dirs: Vec<Vec<f64>>, method| -> Result<Equalized> {
        let mut result = build_partition(oracle, radius, depth, &dirs, opts.cut_tol)?;
        result.f_values = result.leaves().iter().map(|b| cached.eval(b)).collect::<Result<Vec<_>>>()?;
        result.spread = spread(&result.f_values);
        let tree = tree_of(dirs, &result);
        Ok(Equalized { spread: result.spread, converged: result.spread <= opts.target, tree, result, method, evaluations: 0 })
    };

    let mut best: Option<Equalized> = None;
    if k == 1 {
        let root = ConvexBody::ball(n, radius)?;
        if let Ok((angles, _)) = ctx.solve(&root, 0) {
            let nodes = (1usize << depth) - 1;
            let dirs = (0..nodes).map(|j| ctx.direction(level_of(j), &[angles[&j].cos(), angles[&j].sin()])).collect();
            let eq = finish(dirs, EqualizeMethod::Antipodal)?;
            if eq.converged {
                return Ok(Equalized { evaluations: cached.evaluations(), ..eq });
            }
            best = Some(eq);
        }
    }

    // Multi-start Nelder–Mead on the product of spheres.
    let nodes = (1usize << depth) - 1;
    let params = nodes * (k + 1);
    let objective = |w: &[f64]| -> f64 {
        let dirs: Vec<Vec<f64>> =
            (0..nodes).map(|j| ctx.direction(level_of(j), &w[j * (k + 1)..(j + 1) * (k + 1)])).collect();
        let Ok(part) = build_partition(oracle, radius, depth, &dirs, opts.cut_tol) else { return f64::INFINITY };
        let Ok(vals) = part.leaves().iter().map(|b| cached.eval(b)).collect::<Result<Vec<_>>>() else {
            return f64::INFINITY;
        };
        spread(&vals).powi(2)
    };
    let mut rng = rng::aux_stream(seed, 0xe9a1);
    let per_start = (opts.budget / opts.starts.max(1)).max(params + 2);
    let mut used = 0usize;
    for _ in 0..opts.starts {
        if used >= opts.budget {
            break;
        }
        let x0: Vec<f64> = (0..params).map(|_| rng.sample(StandardNormal)).collect();
        let m = nelder_mead(objective, &x0, 0.3, 0.0, opts.target * opts.target * 1e-2, per_start.min(opts.budget - used));
        used += m.evaluations;
        let dirs: Vec<Vec<f64>> =
            (0..nodes).map(|j| ctx.direction(level_of(j), &m.x[j * (k + 1)..(j + 1) * (k + 1)])).collect();
        if let Ok(eq) = finish(dirs, EqualizeMethod::MultiStart) {
            let better = best.as_ref().is_none_or(|b| eq.spread < b.spread);
            if better {
                best = Some(eq);
            }
        }
        if best.as_ref().is_some_and(|b| b.converged) {
            break;
        }
    }
    let eq = best.ok_or_else(|| Error::NotConverged { iterations: used, best: "no feasible partition".into() })?;
    Ok(Equalized { evaluations: cached.evaluations(), ..eq })
}

/// One entry of the width-decrease audit.
#[derive(Clone, Debug)]
pub struct WidthCheck {
    pub node: usize,
    pub child: usize,
    pub parent_width: f64,
    pub child_width: f64,
    /// `1 − c_μ/2` with `c_μ = (m/M)(1 − 2^{-n})`.
    pub bound: f64,
    pub decrease_ok: bool,
    /// Each side keeps at least `2^{-n}` of the parent width.
    pub bracket_ok: bool,
}

/// One entry of the projected-volume audit.
#[derive(Clone, Debug)]
pub struct VolumeCheck {
    pub node: usize,
    pub child: usize,
    pub ratio: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct PancakeReport {
    /// Per leaf: `(δ, measured distance bound)`.
    pub leaves: Vec<(f64, f64)>,
    pub max_delta: f64,
    pub widths: Vec<WidthCheck>,
    pub volumes: Vec<VolumeCheck>,
}

impl PancakeReport {
    pub fn widths_ok(&self) -> bool {
        self.widths.iter().all(|w| w.decrease_ok && w.bracket_ok)
    }
}

/// Lower bound on `min density / max density` over `B(radius)`.
pub fn density_ratio(oracle: &MassOracle, radius: f64) -> f64 {
    match &oracle.measure().spec().kind {
        MeasureKind::UniformBall { radius: r } if *r >= radius => 1.0,
        MeasureKind::GaussianAniso { scales } => {
            let amax = scales.iter().cloned().fold(0.0, f64::max);
            (-amax * radius * radius).exp()
        }
        _ => {
            let m = oracle.measure();
            let n = m.dim();
            let vals: Vec<f64> = (0..=1024)
                .map(|i| {
                    let mut x = vec![0.0; n];
                    x[0] = radius * i as f64 / 1024.0;
                    m.density(&x).map(|d| d.0).unwrap_or(0.0)
                })
                .collect();
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi > 0.0 {
                lo / hi
            } else {
                0.0
            }
        }
    }
}

/// Width-decrease check of one equal-measure cut of `body` along `u`.
pub fn width_check(oracle: &MassOracle, body: &ConvexBody, u: &[f64], ratio: f64, tol: f64) -> Result<[WidthCheck; 2]> {
    let n = body.dim;
    let c = oracle.equal_measure_cut(body, u, 0.5, 1e-10)?;
    let neg: Vec<f64> = u.iter().map(|v| -v).collect();
    let parent = body.directional_width(u)?;
    let c_mu = ratio * (1.0 - 0.5f64.powi(n as i32));
    let bound = 1.0 - c_mu / 2.0;
    let floor = 0.5f64.powi(n as i32);
    let mut out = Vec::with_capacity(2);
    for (i, child) in [body.with_cut(u, c)?, body.with_cut(&neg, -c)?].into_iter().enumerate() {
        let w = child.directional_width(u)?;
        out.push(WidthCheck {
            node: 0,
            child: i,
            parent_width: parent,
            child_width: w,
            bound,
            decrease_ok: w <= bound * parent + tol,
            bracket_ok: w >= floor * parent - tol,
        });
    }
    Ok([out[0].clone(), out[1].clone()])
}

fn projected_volume(body: &ConvexBody, basis: &DMatrix<f64>) -> Result<f64> {
    let e = body.john_ellipsoid()?;
    let s = basis.transpose() * &e.shape;
    Ok((&s * s.transpose()).determinant().max(0.0).sqrt())
}

/// Per-leaf pancake deficiency plus width and projected-volume audits along
/// every cut of the hierarchy.
pub fn verify_pancake(oracle: &MassOracle, result: &PartitionResult, k: usize, frames: &[Frame], tol: f64) -> Result<PancakeReport> {
    let n = oracle.measure().dim();
    let leaves = result
        .leaves()
        .iter()
        .map(|b| pancake_deficiency(b, k).map(|d| (d.delta, d.measured)))
        .collect::<Result<Vec<_>>>()?;
    let max_delta = leaves.iter().map(|l| l.0).fold(0.0, f64::max);
    let ratio = density_ratio(oracle, result.nodes[0].radius);
    let c_mu = ratio * (1.0 - 0.5f64.powi(n as i32));
    let mut widths = Vec::new();
    let mut volumes = Vec::new();
    let floor = 0.5f64.powi(n as i32);
    for (j, u) in result.directions.iter().enumerate() {
        let parent = &result.nodes[j];
        let pw = parent.directional_width(u)?;
        let bound = 1.0 - c_mu / 2.0;
        let basis = frames
            .get(level_of(j))
            .map(|fr| complement_basis(fr, n))
            .unwrap_or_else(|| DMatrix::identity(n, n));
        let basis = if basis.ncols() == k + 1 { basis } else { DMatrix::identity(n, n) };
        let pv = projected_volume(parent, &basis)?;
        for side in 0..2 {
            let child = &result.nodes[2 * j + 1 + side];
            let cw = child.directional_width(u)?;
            widths.push(WidthCheck {
                node: j,
                child: side,
                parent_width: pw,
                child_width: cw,
                bound,
                decrease_ok: cw <= bound * pw + tol,
                bracket_ok: cw >= floor * pw - tol,
            });
            let cv = projected_volume(child, &basis)?;
            let vb = 1.0 - (c_mu / 2.0).powi(k as i32 + 1);
            volumes.push(VolumeCheck { node: j, child: side, ratio: cv / pv, bound: vb, ok: cv <= vb * pv + tol });
        }
    }
    Ok(PancakeReport { leaves, max_delta, widths, volumes })
}

/// Random polytope `B(1) ∩ {⟨u_i, x⟩ ≤ c_i}` with `facets` random unit
/// normals and offsets uniform in `[0.5, 1)`.
pub fn random_round_polytope(n: usize, facets: usize, seed: u64, tag: u64) -> Result<ConvexBody> {
    let mut rng = rng::aux_stream(seed, tag);
    let mut hs = Vec::with_capacity(facets);
    for _ in 0..facets {
        let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c = (0.5 + 0.5 * rng.random::<f64>()) * nu;
        hs.push((u, c));
    }
    ConvexBody::new(n, 1.0, hs)
}

/// Uniformly random unit vector.
pub fn random_direction(n: usize, seed: u64, tag: u64) -> Vec<f64> {
    let mut rng = rng::aux_stream(seed, tag);
    let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.into_iter().map(|v| v / nu).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Measure, MeasureSpec};

    fn disk_oracle() -> MassOracle {
        MassOracle::new(Measure::new(MeasureSpec::uniform_ball(2, 1.0)).unwrap(), 0).unwrap()
    }

    #[test]
    fn frames_are_orthonormal_and_reproducible() {
        let a = subspace_sequence(5, 2, 4, 9).unwrap();
        let b = subspace_sequence(5, 2, 4, 9).unwrap();
        assert_eq!(a, b);
        for f in &a {
            assert_eq!(f.len(), 2);
            assert!((f[0].norm() - 1.0).abs() < 1e-12 && f[0].dot(&f[1]).abs() < 1e-12);
            let c = complement_basis(f, 5);
            assert_eq!(c.ncols(), 3);
            assert!((c.transpose() * &c - DMatrix::identity(3, 3)).norm() < 1e-12);
            assert!(f.iter().all(|v| (c.transpose() * v).norm() < 1e-12));
        }
        assert!(subspace_sequence(2, 1, 3, 0).unwrap().iter().all(|f| f.is_empty()));
        assert!(subspace_sequence(2, 2, 1, 0).is_err());
    }

    #[test]
    fn depth_zero_and_one() {
        let o = disk_oracle();
        let p = build_partition(&o, 1.0, 0, &[], 1e-10).unwrap();
        assert_eq!(p.leaves().len(), 1);
        assert!((p.masses[0] - 1.0).abs() < 1e-12);
        let p = build_partition(&o, 1.0, 1, &[vec![1.0, 0.0]], 1e-10).unwrap();
        assert!(p.offsets[0].abs() < 1e-9);
        assert!(p.masses.iter().all(|m| (m - 0.5).abs() < 1e-10));
    }

    #[test]
    fn quadrants() {
        let o = disk_oracle();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let p = build_partition(&o, 1.0, 2, &dirs, 1e-10).unwrap();
        assert!(p.mass_deviation() < 1e-8);
        for b in p.leaves() {
            assert!((b.directional_width(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_functional_has_zero_spread() {
        let o = disk_oracle();
        let f = |_: &ConvexBody| Ok(vec![1.0]);
        let frames = subspace_sequence(2, 1, 2, 0).unwrap();
        let eq = equalize_f(&o, 1.0, &f, 1, 2, &frames, 0, EqualizeOptions::default()).unwrap();
        assert_eq!(eq.spread, 0.0);
        assert!(eq.converged);
    }

    #[test]
    fn centroid_functional_depth_one() {
        let o = disk_oracle();
        let f = |b: &ConvexBody| o.moments(b).map(|(_, c)| vec![c[0]]);
        let frames = subspace_sequence(2, 1, 1, 0).unwrap();
        let eq = equalize_f(&o, 1.0, &f, 1, 1, &frames, 0, EqualizeOptions::default()).unwrap();
        assert!(eq.spread < 1e-6, "{}", eq.spread);
        // the cut normal must be ±e_2
        assert!(eq.tree.directions[0][0].abs() < 1e-4, "{:?}", eq.tree.directions);
        eq.tree.validate().unwrap();
    }

    #[test]
    fn multistart_handles_two_dimensional_values() {
        // k = 2 in R^3 needs the general search.
        let o = MassOracle::new(Measure::new(MeasureSpec::uniform_ball(3, 1.0)).unwrap(), 1).unwrap();
        let f = |b: &ConvexBody| o.moments(b).map(|(_, c)| vec![c[0], c[1]]);
        let frames = subspace_sequence(3, 2, 1, 0).unwrap();
        let opts = EqualizeOptions { budget: 600, starts: 4, target: 1e-2, ..EqualizeOptions::default() };
        let eq = equalize_f(&o, 1.0, &f, 2, 1, &frames, 0, opts).unwrap();
        assert_eq!(eq.method, EqualizeMethod::MultiStart);
        assert!(eq.spread < 1e-2, "{}", eq.spread);
    }

    #[test]
    fn halving_square_widths() {
        let o = MassOracle::new(Measure::new(MeasureSpec::uniform_ball(2, 10.0)).unwrap(), 0).unwrap();
        let mut body = ConvexBody::aligned_box(&[-1.0, -1.0], &[1.0, 1.0], 10.0).unwrap();
        for i in 1..5 {
            let [l, _] = width_check(&o, &body, &[1.0, 0.0], 1.0, 1e-8).unwrap();
            assert!((l.child_width - 2f64.powi(1 - i)).abs() < 1e-8);
            assert!(l.decrease_ok && l.bracket_ok);
            assert!((l.bound - 5.0 / 8.0).abs() < 1e-15);
            let c = o.equal_measure_cut(&body, &[1.0, 0.0], 0.5, 1e-12).unwrap();
            body = body.with_cut(&[1.0, 0.0], c).unwrap();
        }
    }

    #[test]
    fn triangle_breaks_the_decrease_constant() {
        // A median cut of a triangle parallel to a side leaves a side of
        // relative width 1/√2 > 5/8, while the bracket 2^{-n} still holds.
        let o = MassOracle::new(Measure::new(MeasureSpec::uniform_ball(2, 10.0)).unwrap(), 0).unwrap();
        let tri = ConvexBody::new(2, 10.0, vec![(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0), (vec![1.0, 1.0], 1.0)]).unwrap();
        let [l, r] = width_check(&o, &tri, &[1.0, 0.0], 1.0, 1e-8).unwrap();
        assert!((r.child_width - 1.0 / 2f64.sqrt()).abs() < 1e-8);
        assert!(!r.decrease_ok);
        assert!(l.bracket_ok && r.bracket_ok);
    }

    #[test]
    fn verify_reports_all_cuts() {
        let o = disk_oracle();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let p = build_partition(&o, 1.0, 2, &dirs, 1e-10).unwrap();
        let frames = subspace_sequence(2, 1, 2, 0).unwrap();
        let rep = verify_pancake(&o, &p, 1, &frames, 1e-7).unwrap();
        assert_eq!(rep.widths.len(), 6);
        assert_eq!(rep.leaves.len(), 4);
        assert!(rep.volumes.iter().all(|v| v.ok), "{:?}", rep.volumes);
        let p0 = build_partition(&o, 1.0, 0, &[], 1e-10).unwrap();
        let rep0 = verify_pancake(&o, &p0, 1, &frames, 1e-7).unwrap();
        assert!((rep0.max_delta - 2.0).abs() < 1e-5);
    }
}
