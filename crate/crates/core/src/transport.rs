//! Monotone (Brenier) transport from a Gaussian to its restriction to a convex
//! body, the center `T(0)`, and numerical audits of the resulting map.
//!
//! Two solvers share one map type. When the body is an axis-aligned box whose
//! bounding ball carries no Gaussian mass the map is a product of exact 1-D
//! CDF inversions. Otherwise (`n ≤ 3`) an entropic transport problem is solved
//! on tensor grids by log-domain Sinkhorn with annealed regularization, and the
//! map is its out-of-sample barycentric projection
//! `T(x) = Σ_j w_j(x) y_j`, `w_j ∝ β_j exp((g_j + ⟨x, y_j⟩ − |y_j|²/2)/ε)`.
//! That map is the gradient of `U(x) = ε log Σ_j β_j exp((g_j + ⟨x, y_j⟩ − |y_j|²/2)/ε)`,
//! a log-sum-exp of affine functions, so the recovered potential is convex
//! everywhere and not only on the grid.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use serde::Serialize;

use crate::convex::{ConvexBody, MassOracle};
use crate::error::{invalid, Error, Result};
use crate::measures::{Measure, MeasureSpec};
use crate::numeric::quadrature::integrate;
use crate::numeric::special::{gamma_lr, normal_cdf, normal_quantile};
use crate::rng;

/// Source box half-width in units of the per-axis standard deviation.
const SOURCE_SPAN: f64 = 5.5;
/// Terms this far below the running maximum are dropped from log-sum-exp.
const LSE_CUTOFF: f64 = 36.0;
/// Over-relaxation factor for Sinkhorn updates.
const OVER_RELAX: f64 = 1.5;

#[derive(Clone, Debug)]
pub struct TransportOptions {
    /// Grid nodes per axis for the entropic solver.
    pub resolution: usize,
    /// Use the grid solver even when the product solver applies.
    pub force_grid: bool,
    /// Translate the target measure by this vector.
    pub shift: Option<Vec<f64>>,
    /// Total-variation target on the dyadic test partition.
    pub tv_target: f64,
    /// Smallest regularization, relative to the largest source variance.
    pub epsilon_floor: f64,
    /// Source-marginal L1 error that ends the last Sinkhorn stage.
    pub sinkhorn_tol: f64,
    /// Cap on Sinkhorn iterations over all stages.
    pub max_iterations: usize,
    /// Samples used for the grid solver's pushforward check.
    pub tv_samples: usize,
    pub seed: u64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            resolution: 128,
            force_grid: false,
            shift: None,
            tv_target: 0.02,
            epsilon_floor: 1e-3,
            sinkhorn_tol: 1e-7,
            max_iterations: 40_000,
            tv_samples: 1 << 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Product,
    Grid,
}

/// One annealing stage of the entropic solver.
#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub epsilon: f64,
    pub iterations: usize,
    pub marginal_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub solver: SolverKind,
    /// Total-variation distance between the pushforward and the target on
    /// the `2^n` dyadic cells of the target's bounding box.
    pub discrepancy: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub stages: Vec<Stage>,
    /// Images closer than this to the body boundary are excluded from
    /// residual checks.
    pub boundary_width: f64,
}

/// Monotone map of `N(0, diag(1/(2a)))` onto its restriction to `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct IntervalMap {
    sigma: f64,
    lo: f64,
    hi: f64,
    /// `Φ(lo)` and `Φ(−hi)` in standardized units.
    left: f64,
    right: f64,
    mass: f64,
}

impl IntervalMap {
    pub fn new(scale: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("Gaussian scales must be positive"));
        }
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Degenerate("empty interval".into()));
        }
        let sigma = (0.5 / scale).sqrt();
        let (a, b) = (lo / sigma, hi / sigma);
        let left = normal_cdf(a);
        let right = normal_cdf(-b);
        let mass = if a >= 0.0 {
            normal_cdf(-a) - right
        } else if b <= 0.0 {
            normal_cdf(b) - left
        } else {
            1.0 - left - right
        };
        if mass <= 1e-300 {
            return Err(Error::Degenerate("interval carries no Gaussian mass".into()));
        }
        Ok(IntervalMap { sigma, lo: a, hi: b, left, right, mass })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Probability of the interval under the source.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn map(&self, x: f64) -> f64 {
        let z = x / self.sigma;
        let q = self.left + normal_cdf(z) * self.mass;
        let qc = self.right + normal_cdf(-z) * self.mass;
        let w = if q <= qc { normal_quantile(q) } else { -normal_quantile(qc) };
        self.sigma * w.clamp(self.lo, self.hi)
    }

    /// `T'(x) = m φ(z)/φ(T(z))` in standardized units.
    pub fn derivative(&self, x: f64) -> f64 {
        let z = x / self.sigma;
        let w = self.map(x) / self.sigma;
        self.mass * (0.5 * (w * w - z * z)).exp()
    }

    /// Target CDF at `y` (fraction of the interval's mass below `y`).
    pub fn target_cdf(&self, y: f64) -> f64 {
        let w = (y / self.sigma).clamp(self.lo, self.hi);
        let below = if w <= 0.0 { normal_cdf(w) - self.left } else { 1.0 - self.left - normal_cdf(-w) };
        (below / self.mass).clamp(0.0, 1.0)
    }

    /// `∫_0^x T`.
    pub fn potential(&self, x: f64) -> f64 {
        integrate(|s| self.map(s), 0.0, x, 1e-13, 1e-13).value
    }
}

/// Entropic map on a tensor target grid. The logits
/// `l_j(x) = ln β_j + (g_j + ⟨x, y_j⟩ − |y_j|²/2)/ε` are close to concave in
/// the node index, so the weights are summed over a box grown from the
/// maximizing node until every face lies below the cutoff.
#[derive(Clone, Debug)]
struct GridMap {
    epsilon: f64,
    grid: Grid,
    /// `ln β_j + (g_j − |y_j|²/2)/ε` on the full target grid, `−∞` off the body.
    bias: Vec<f64>,
    /// Maximizing node for the corners of a coarse source lattice.
    coarse: Grid,
    seeds: Vec<usize>,
}

const COARSE: usize = 9;

impl GridMap {
    fn new(epsilon: f64, grid: Grid, bias: Vec<f64>, source: &Grid) -> Self {
        let n = grid.dim();
        let hi: Vec<f64> = (0..n).map(|d| source.coord(d, source.m - 1)).collect();
        let coarse = Grid::new(source.lo.clone(), &hi, COARSE);
        let mut map = GridMap { epsilon, grid, bias, coarse, seeds: Vec::new() };
        let mut x = vec![0.0; n];
        map.seeds = (0..map.coarse.len())
            .map(|c| {
                map.coarse.node(c, &mut x);
                map.argmax_full(&x)
            })
            .collect();
        map
    }

    fn logit(&self, x: &[f64], idx: &[usize]) -> f64 {
        let mut flat = 0;
        let mut l = 0.0;
        for (d, i) in idx.iter().enumerate() {
            flat = flat * self.grid.m + i;
            l += x[d] * self.grid.coord(d, *i);
        }
        self.bias[flat] + l / self.epsilon
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let n = self.grid.dim();
        let mut idx = vec![0; n];
        for d in (0..n).rev() {
            idx[d] = flat % self.grid.m;
            flat /= self.grid.m;
        }
        idx
    }

    fn argmax_full(&self, x: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for flat in 0..self.bias.len() {
            if self.bias[flat] > f64::NEG_INFINITY {
                let l = self.logit(x, &self.unflatten(flat));
                if l > best.0 {
                    best = (l, flat);
                }
            }
        }
        best.1
    }

    fn scan(&self, x: &[f64]) -> Scan<'_> {
        let n = self.grid.dim();
        let m = self.grid.m;
        let xc = (0..n).map(|d| (0..m).map(|i| x[d] * self.grid.coord(d, i) / self.epsilon).collect()).collect();
        let strides = (0..n).map(|d| m.pow((n - 1 - d) as u32)).collect();
        let mut c = 0;
        for d in 0..n {
            let t = ((x[d] - self.coarse.lo[d]) / self.coarse.step[d]).round().clamp(0.0, (COARSE - 1) as f64) as usize;
            c = c * COARSE + t;
        }
        Scan { map: self, xc, strides, seed: self.unflatten(self.seeds[c]) }
    }

    /// Normalizing sum and weighted node sum over the superlevel set.
    fn weighted(&self, x: &[f64]) -> (Vec<f64>, f64, f64) {
        let n = x.len();
        let mut scan = self.scan(x);
        let mut seed = scan.seed.clone();
        let best = scan.submax(0, 0, 0.0, &mut seed);
        scan.seed = seed;
        let mut acc = vec![0.0; n];
        let mut total = 0.0;
        let m = self.grid.m;
        let mut sink = |mut flat: usize, l: f64| {
            let w = (l - best).exp();
            total += w;
            for d in (0..n).rev() {
                acc[d] += w * self.grid.coord(d, flat % m);
                flat /= m;
            }
        };
        let mut seed = scan.seed.clone();
        scan.enumerate(0, 0, 0.0, &mut seed, best - LSE_CUTOFF, &mut sink);
        (acc, total, best)
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let (acc, total, _) = self.weighted(x);
        acc.iter().map(|v| v / total).collect()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let (_, total, best) = self.weighted(x);
        self.epsilon * (best + total.ln())
    }

    #[cfg(test)]
    fn evaluate_full(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.dim();
        let best = self.logit(x, &self.unflatten(self.argmax_full(x)));
        let mut acc = vec![0.0; n];
        let mut total = 0.0;
        for flat in 0..self.bias.len() {
            let idx = self.unflatten(flat);
            let s = self.logit(x, &idx) - best;
            if s > -LSE_CUTOFF {
                let w = s.exp();
                total += w;
                for d in 0..n {
                    acc[d] += w * self.grid.coord(d, idx[d]);
                }
            }
        }
        acc.iter().map(|v| v / total).collect()
    }
}

/// Walks the (near-convex) superlevel set of the logits slice by slice.
struct Scan<'a> {
    map: &'a GridMap,
    /// Per axis, `x_d · coord_d(i) / ε`.
    xc: Vec<Vec<f64>>,
    strides: Vec<usize>,
    seed: Vec<usize>,
}

impl Scan<'_> {
    fn last(&self) -> usize {
        self.xc.len() - 1
    }

    fn line(&self, flat: usize, sum: f64, j: usize) -> f64 {
        self.map.bias[flat + j] + sum + self.xc[self.last()][j]
    }

    /// Local maximum of a last-axis line, climbing from `start`.
    fn climb_line(&self, flat: usize, sum: f64, start: usize) -> (usize, f64) {
        let m = self.map.grid.m;
        let mut j = start;
        let mut v = self.line(flat, sum, j);
        if v == f64::NEG_INFINITY {
            match (1..m).flat_map(|r| [start.checked_add(r), start.checked_sub(r)]).flatten().find(|&k| k < m && self.line(flat, sum, k) > f64::NEG_INFINITY) {
                Some(k) => {
                    j = k;
                    v = self.line(flat, sum, k);
                }
                None => return (start, v),
            }
        }
        loop {
            if j + 1 < m && self.line(flat, sum, j + 1) > v {
                j += 1;
            } else if j > 0 && self.line(flat, sum, j - 1) > v {
                j -= 1;
            } else {
                return (j, v);
            }
            v = self.line(flat, sum, j);
        }
    }

    /// Maximum over the slice with the leading `axis` indices fixed; `seed`
    /// carries the starting node in and the maximizer out.
    fn submax(&self, axis: usize, flat: usize, sum: f64, seed: &mut [usize]) -> f64 {
        if axis == self.last() {
            let (j, v) = self.climb_line(flat, sum, seed[axis]);
            seed[axis] = j;
            return v;
        }
        let m = self.map.grid.m;
        let stride = self.strides[axis];
        let eval = |i: usize, s: &mut [usize]| self.submax(axis + 1, flat + i * stride, sum + self.xc[axis][i], s);
        let mut i = seed[axis];
        let mut s = seed.to_vec();
        let mut v = eval(i, &mut s);
        if v == f64::NEG_INFINITY {
            for k in 0..m {
                let mut t = seed.to_vec();
                let w = eval(k, &mut t);
                if w > v {
                    (i, v, s) = (k, w, t);
                }
            }
        }
        loop {
            let mut moved = false;
            for k in [i + 1, i.wrapping_sub(1)] {
                if k < m {
                    let mut t = s.clone();
                    let w = eval(k, &mut t);
                    if w > v {
                        (i, v, s) = (k, w, t);
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        seed[axis + 1..].copy_from_slice(&s[axis + 1..]);
        seed[axis] = i;
        v
    }

    /// Feeds every node above `thresh` in the slice to `sink`; returns the
    /// slice maximum.
    fn enumerate(&self, axis: usize, flat: usize, sum: f64, seed: &mut [usize], thresh: f64, sink: &mut dyn FnMut(usize, f64)) -> f64 {
        let m = self.map.grid.m;
        if axis == self.last() {
            let (j, v) = self.climb_line(flat, sum, seed[axis]);
            seed[axis] = j;
            if v > thresh {
                sink(flat + j, v);
                for k in (j + 1)..m {
                    let l = self.line(flat, sum, k);
                    if l <= thresh {
                        break;
                    }
                    sink(flat + k, l);
                }
                for k in (0..j).rev() {
                    let l = self.line(flat, sum, k);
                    if l <= thresh {
                        break;
                    }
                    sink(flat + k, l);
                }
            }
            return v;
        }
        let v = self.submax(axis, flat, sum, seed);
        if v <= thresh {
            return v;
        }
        let stride = self.strides[axis];
        let top = seed[axis];
        let base = seed.to_vec();
        let mut s = base.clone();
        for i in top..m {
            if self.enumerate(axis + 1, flat + i * stride, sum + self.xc[axis][i], &mut s, thresh, sink) <= thresh {
                break;
            }
        }
        let mut s = base;
        for i in (0..top).rev() {
            if self.enumerate(axis + 1, flat + i * stride, sum + self.xc[axis][i], &mut s, thresh, sink) <= thresh {
                break;
            }
        }
        v
    }
}

#[derive(Clone, Debug)]
enum MapKind {
    Product(Vec<IntervalMap>),
    Grid(GridMap),
}

/// A solved monotone map `T = ∇U` from the Gaussian with density
/// `∝ exp(−Σ a_i x_i²)` to its normalized restriction to `body`, translated
/// by `shift`.
#[derive(Clone, Debug)]
pub struct TransportMap {
    scales: Vec<f64>,
    body: ConvexBody,
    shift: Vec<f64>,
    /// Source probability of the body.
    target_mass: f64,
    kind: MapKind,
    pub diagnostics: Diagnostics,
}

impl TransportMap {
    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn target_mass(&self) -> f64 {
        self.target_mass
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut y = match &self.kind {
            MapKind::Product(maps) => maps.iter().zip(x).map(|(m, v)| m.map(*v)).collect(),
            MapKind::Grid(g) => g.evaluate(x),
        };
        for (v, s) in y.iter_mut().zip(&self.shift) {
            *v += s;
        }
        y
    }

    /// The potential `U` with `∇U = T`, up to an additive constant.
    pub fn potential(&self, x: &[f64]) -> f64 {
        let base = match &self.kind {
            MapKind::Product(maps) => maps.iter().zip(x).map(|(m, v)| m.potential(*v)).sum(),
            MapKind::Grid(g) => g.potential(x),
        };
        base + self.shift.iter().zip(x).map(|(s, v)| s * v).sum::<f64>()
    }

    /// The center `T(0)`.
    pub fn center(&self) -> Vec<f64> {
        self.evaluate(&vec![0.0; self.dim()])
    }

    /// Symmetrized central-difference Jacobian of `T`.
    pub fn jacobian(&self, x: &[f64], step: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut p = x.to_vec();
        for j in 0..n {
            p[j] = x[j] + step;
            let up = self.evaluate(&p);
            p[j] = x[j] - step;
            let down = self.evaluate(&p);
            p[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (up[i] - down[i]) / (2.0 * step);
            }
        }
        (&jac + jac.transpose()) * 0.5
    }

    fn source_measure(&self) -> Result<Measure> {
        Measure::new(MeasureSpec::gaussian(self.scales.clone()))
    }
}

/// Solves the monotone transport from the Gaussian with the given scales to
/// its restriction to `body` (translated by `opts.shift`).
pub fn solve_monotone_transport(scales: &[f64], body: &ConvexBody, opts: &TransportOptions) -> Result<TransportMap> {
    let n = scales.len();
    if n == 0 || body.dim != n {
        return Err(invalid("scales and body dimensions differ"));
    }
    if scales.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(invalid("Gaussian scales must be positive"));
    }
    let shift = opts.shift.clone().unwrap_or_else(|| vec![0.0; n]);
    if shift.len() != n || shift.iter().any(|v| !v.is_finite()) {
        return Err(invalid("shift must be a finite vector of the ambient dimension"));
    }
    if !opts.force_grid {
        if let Some(bounds) = product_bounds(scales, body) {
            return solve_product(scales, body, shift, &bounds);
        }
    }
    if n > 3 {
        return Err(Error::Unsupported("grid transport is limited to n <= 3".into()));
    }
    solve_grid(scales, body, shift, opts)
}

/// Per-axis bounds when the body is an axis-aligned box whose bounding ball
/// cuts off a negligible part of the Gaussian box mass.
fn product_bounds(scales: &[f64], body: &ConvexBody) -> Option<Vec<(f64, f64)>> {
    let n = scales.len();
    let mut bounds = vec![(-body.radius, body.radius); n];
    for h in &body.halfspaces {
        let axis = h.normal.iter().position(|v| (v.abs() - 1.0).abs() <= 1e-12)?;
        if h.normal.iter().enumerate().any(|(i, v)| i != axis && v.abs() > 1e-12) {
            return None;
        }
        if h.normal[axis] > 0.0 {
            bounds[axis].1 = bounds[axis].1.min(h.offset);
        } else {
            bounds[axis].0 = bounds[axis].0.max(-h.offset);
        }
    }
    if n == 1 {
        return Some(bounds);
    }
    let corner: f64 = bounds.iter().map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2)).sum::<f64>().sqrt();
    if corner <= body.radius {
        return Some(bounds);
    }
    let mut box_mass = 1.0;
    for (a, (lo, hi)) in scales.iter().zip(&bounds) {
        box_mass *= IntervalMap::new(*a, *lo, *hi).ok()?.mass();
    }
    let a_min = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let tail = 1.0 - gamma_lr(n as f64 / 2.0, a_min * body.radius * body.radius);
    (tail <= 1e-12 * box_mass).then_some(bounds)
}

fn solve_product(scales: &[f64], body: &ConvexBody, shift: Vec<f64>, bounds: &[(f64, f64)]) -> Result<TransportMap> {
    let maps = scales.iter().zip(bounds).map(|(a, (lo, hi))| IntervalMap::new(*a, *lo, *hi)).collect::<Result<Vec<_>>>()?;
    let target_mass: f64 = maps.iter().map(IntervalMap::mass).product();
    if target_mass < 1e-9 {
        return Err(Error::Degenerate("body measure below 1e-9".into()));
    }
    let mut map = TransportMap {
        scales: scales.to_vec(),
        body: body.clone(),
        shift,
        target_mass,
        kind: MapKind::Product(maps),
        diagnostics: Diagnostics { solver: SolverKind::Product, discrepancy: f64::NAN, epsilon: 0.0, iterations: 0, stages: Vec::new(), boundary_width: 0.0 },
    };
    map.diagnostics.discrepancy = product_discrepancy(&map, bounds);
    Ok(map)
}

/// Exact dyadic-cell discrepancy of a product map: each cell boundary is
/// pulled back through the evaluated map by bisection and the source mass of
/// the preimage compared with the target mass from the Gaussian CDF.
fn product_discrepancy(map: &TransportMap, bounds: &[(f64, f64)]) -> f64 {
    let MapKind::Product(maps) = &map.kind else { return f64::NAN };
    let n = maps.len();
    let mut sides = Vec::with_capacity(n);
    for (d, m) in maps.iter().enumerate() {
        let (lo, hi) = bounds[d];
        let a = if lo.is_finite() { lo } else { -SOURCE_SPAN * 8.0 * m.sigma() };
        let b = if hi.is_finite() { hi } else { SOURCE_SPAN * 8.0 * m.sigma() };
        let mid = 0.5 * (a + b);
        let (mut l, mut r) = (-40.0 * m.sigma(), 40.0 * m.sigma());
        for _ in 0..200 {
            let c = 0.5 * (l + r);
            let mut probe = vec![0.0; n];
            probe[d] = c;
            if map.evaluate(&probe)[d] - map.shift[d] < mid {
                l = c;
            } else {
                r = c;
            }
        }
        let pre = 0.5 * (l + r) / m.sigma();
        sides.push((normal_cdf(pre), m.target_cdf(mid)));
    }
    let mut tv = 0.0;
    for cell in 0..(1usize << n) {
        let (mut p, mut q) = (1.0, 1.0);
        for (d, (src, tgt)) in sides.iter().enumerate() {
            if cell >> d & 1 == 0 {
                p *= src;
                q *= tgt;
            } else {
                p *= 1.0 - src;
                q *= 1.0 - tgt;
            }
        }
        tv += (p - q).abs();
    }
    0.5 * tv
}

/// Tensor grid with `m` nodes per axis.
#[derive(Clone, Debug)]
struct Grid {
    m: usize,
    lo: Vec<f64>,
    step: Vec<f64>,
}

impl Grid {
    fn new(lo: Vec<f64>, hi: &[f64], m: usize) -> Self {
        let step = lo.iter().zip(hi).map(|(a, b)| (b - a) / (m - 1) as f64).collect();
        Grid { m, lo, step }
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn len(&self) -> usize {
        self.m.pow(self.dim() as u32)
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.step[axis]
    }

    fn node(&self, mut flat: usize, out: &mut [f64]) {
        for d in (0..self.dim()).rev() {
            out[d] = self.coord(d, flat % self.m);
            flat /= self.m;
        }
    }
}

/// Log-domain separable Gaussian-kernel transform between two tensor grids:
/// `out[o] = LSE_i(a[i] − |x_i − y_o|²/(2ε))`, one axis at a time.
struct KernelOp {
    m: usize,
    n: usize,
    /// Per axis, `m × m` exponents indexed `[out][in]`.
    kernels: Vec<Vec<f64>>,
}

impl KernelOp {
    fn new(from: &Grid, to: &Grid, epsilon: f64) -> Self {
        let m = from.m;
        let n = from.dim();
        let kernels = (0..n)
            .map(|d| {
                let mut k = Vec::with_capacity(m * m);
                for o in 0..m {
                    let y = to.coord(d, o);
                    for i in 0..m {
                        let t = from.coord(d, i) - y;
                        k.push(-t * t / (2.0 * epsilon));
                    }
                }
                k
            })
            .collect();
        KernelOp { m, n, kernels }
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut cur = input.to_vec();
        let mut next = vec![0.0; cur.len()];
        let mut line = vec![0.0; m];
        let mut out = vec![0.0; m];
        for d in 0..self.n {
            let inner = m.pow((self.n - 1 - d) as u32);
            let outer = cur.len() / (m * inner);
            let k = &self.kernels[d];
            for o in 0..outer {
                for q in 0..inner {
                    let base = o * m * inner + q;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = cur[base + i * inner];
                    }
                    lse_line(&line, k, &mut out);
                    for (j, v) in out.iter().enumerate() {
                        next[base + j * inner] = *v;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }
}

/// One line of the kernel transform. The maximizer of `a_i + k_{ji}` is
/// nondecreasing in `j` for the Gaussian kernel, and the Sinkhorn inputs are
/// close to concave, so each output climbs from the previous maximizer and
/// sums outward until terms fall below the cutoff.
fn lse_line(a: &[f64], k: &[f64], out: &mut [f64]) {
    let m = a.len();
    let Some(first) = a.iter().position(|v| *v > f64::NEG_INFINITY) else {
        out.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        return;
    };
    let last = a.iter().rposition(|v| *v > f64::NEG_INFINITY).unwrap_or(first);
    let mut p = first;
    for (j, slot) in out.iter_mut().enumerate() {
        let row = &k[j * m..(j + 1) * m];
        while p < last && a[p + 1] + row[p + 1] >= a[p] + row[p] {
            p += 1;
        }
        let best = a[p] + row[p];
        let floor = best - LSE_CUTOFF;
        let mut s = 1.0;
        for i in (p + 1)..=last {
            let v = a[i] + row[i];
            if v <= floor {
                break;
            }
            s += (v - best).exp();
        }
        for i in (first..p).rev() {
            let v = a[i] + row[i];
            if v <= floor {
                break;
            }
            s += (v - best).exp();
        }
        *slot = best + s.ln();
    }
}

#[cfg(test)]
fn lse_line_full(a: &[f64], k: &[f64], out: &mut [f64]) {
    let m = a.len();
    for (j, slot) in out.iter_mut().enumerate() {
        let row = &k[j * m..(j + 1) * m];
        let terms: Vec<f64> = a.iter().zip(row).map(|(x, y)| x + y).collect();
        *slot = logsumexp(&terms);
    }
}

/// Weight of the target cell around `y` (source coordinates `y − shift`):
/// clipped area times the Gaussian density at the clipped centroid.
fn cell_weight(body: &ConvexBody, scales: &[f64], center: &[f64], step: &[f64]) -> f64 {
    let density = |p: &[f64]| (-scales.iter().zip(p).map(|(a, v)| a * v * v).sum::<f64>()).exp();
    let n = center.len();
    if n == 2 {
        let (hx, hy) = (0.5 * step[0], 0.5 * step[1]);
        let mut poly = vec![
            [center[0] - hx, center[1] - hy],
            [center[0] + hx, center[1] - hy],
            [center[0] + hx, center[1] + hy],
            [center[0] - hx, center[1] + hy],
        ];
        for h in &body.halfspaces {
            poly = clip(&poly, [h.normal[0], h.normal[1]], h.offset);
            if poly.is_empty() {
                return 0.0;
            }
        }
        if poly.iter().all(|p| p[0].hypot(p[1]) <= body.radius) {
            let (area, cx, cy) = polygon_moments(&poly);
            return if area > 0.0 { area * density(&[cx, cy]) } else { 0.0 };
        }
    }
    // Subsampled fallback (other dimensions, or cells crossing the ball).
    let per: usize = if n == 1 { 64 } else if n == 2 { 16 } else { 6 };
    let total = per.pow(n as u32);
    let vol: f64 = step.iter().product();
    let mut p = vec![0.0; n];
    let mut acc = 0.0;
    for s in 0..total {
        let mut r = s;
        for d in 0..n {
            let i = r % per;
            r /= per;
            p[d] = center[d] - 0.5 * step[d] + (i as f64 + 0.5) * step[d] / per as f64;
        }
        if body.contains(&p, 0.0) {
            acc += density(&p);
        }
    }
    acc * vol / total as f64
}

fn clip(poly: &[[f64; 2]], u: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| c - (u[0] * p[0] + u[1] * p[1]);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (sa, sb) = (side(&a), side(&b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn polygon_moments(poly: &[[f64; 2]]) -> (f64, f64, f64) {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    if a.abs() < 1e-300 {
        return (0.0, 0.0, 0.0);
    }
    (0.5 * a.abs(), cx / (3.0 * a), cy / (3.0 * a))
}

fn logsumexp(v: &[f64]) -> f64 {
    let best = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return best;
    }
    best + v.iter().map(|x| (x - best).exp()).sum::<f64>().ln()
}

fn solve_grid(scales: &[f64], body: &ConvexBody, shift: Vec<f64>, opts: &TransportOptions) -> Result<TransportMap> {
    let n = scales.len();
    let m = opts.resolution;
    if m < 4 {
        return Err(invalid("grid resolution must be at least 4"));
    }
    let sigmas: Vec<f64> = scales.iter().map(|a| (0.5 / a).sqrt()).collect();
    let var_max = sigmas.iter().map(|s| s * s).fold(0.0, f64::max);
    let oracle = MassOracle::new(Measure::new(MeasureSpec::gaussian(scales.to_vec()))?, opts.seed)?;
    let target_mass = oracle.mass(body)?;
    if target_mass < 1e-9 {
        return Err(Error::Degenerate("body measure below 1e-9".into()));
    }

    let s_lo: Vec<f64> = sigmas.iter().map(|s| -SOURCE_SPAN * s).collect();
    let s_hi: Vec<f64> = sigmas.iter().map(|s| SOURCE_SPAN * s).collect();
    let source = Grid::new(s_lo.clone(), &s_hi, m);
    let (b_lo, b_hi) = body.bounding_box()?;
    let t_lo: Vec<f64> = (0..n).map(|d| b_lo[d].max(s_lo[d])).collect();
    let t_hi: Vec<f64> = (0..n).map(|d| b_hi[d].min(s_hi[d])).collect();
    if (0..n).any(|d| t_hi[d] <= t_lo[d]) {
        return Err(Error::Degenerate("body misses the source box".into()));
    }
    let target = Grid::new(t_lo, &t_hi, m);

    let mut la = vec![0.0; source.len()];
    let mut p = vec![0.0; n];
    for (i, v) in la.iter_mut().enumerate() {
        source.node(i, &mut p);
        *v = -scales.iter().zip(&p).map(|(a, x)| a * x * x).sum::<f64>();
    }
    let norm = logsumexp(&la);
    la.iter_mut().for_each(|v| *v -= norm);

    let mut lb = vec![f64::NEG_INFINITY; target.len()];
    for (j, v) in lb.iter_mut().enumerate() {
        target.node(j, &mut p);
        let w = cell_weight(body, scales, &p, &target.step);
        if w > 0.0 {
            *v = w.ln();
        }
    }
    let norm = logsumexp(&lb);
    if !norm.is_finite() {
        return Err(Error::Degenerate("no target cell meets the body".into()));
    }
    lb.iter_mut().for_each(|v| *v -= norm);

    let h2 = source.step.iter().chain(&target.step).map(|h| h * h).fold(0.0, f64::max);
    let floor = (opts.epsilon_floor * var_max).max(h2);
    let mut epsilon = var_max;
    let mut f = vec![0.0; source.len()];
    let mut g: Vec<f64> = vec![0.0; target.len()];
    let mut stages = Vec::new();
    let mut iterations = 0usize;
    loop {
        let last = epsilon <= floor;
        let tol = if last { opts.sinkhorn_tol } else { opts.sinkhorn_tol.max(1e-3) };
        let to_target = KernelOp::new(&source, &target, epsilon);
        let to_source = KernelOp::new(&target, &source, epsilon);
        let mut stage_iters = 0usize;
        let mut err = f64::INFINITY;
        while err > tol && iterations < opts.max_iterations {
            // Over-relaxed updates once the stage has settled.
            let omega = if stage_iters >= 4 { OVER_RELAX } else { 1.0 };
            let a: Vec<f64> = la.iter().zip(&f).map(|(l, v)| l + v / epsilon).collect();
            let g_new = to_target.apply(&a);
            for (v, t) in g.iter_mut().zip(&g_new) {
                let t = -epsilon * t;
                *v = if v.is_finite() && t.is_finite() { *v + omega * (t - *v) } else { t };
            }
            let b: Vec<f64> = lb.iter().zip(&g).map(|(l, v)| l + v / epsilon).collect();
            let f_new: Vec<f64> = to_source.apply(&b).iter().map(|v| -epsilon * v).collect();
            err = la.iter().zip(f.iter().zip(&f_new)).map(|(l, (old, new))| l.exp() * (((old - new) / epsilon).exp() - 1.0).abs()).sum();
            for (v, t) in f.iter_mut().zip(&f_new) {
                *v += omega * (t - *v);
            }
            stage_iters += 1;
            iterations += 1;
        }
        // Finish on a plain target update so the target marginal is exact.
        let a: Vec<f64> = la.iter().zip(&f).map(|(l, v)| l + v / epsilon).collect();
        g = to_target.apply(&a).iter().map(|v| -epsilon * v).collect();
        stages.push(Stage { epsilon, iterations: stage_iters, marginal_error: err });
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged { iterations, best: format!("marginal error {err:e} at epsilon {epsilon:e}") });
        }
        if last {
            break;
        }
        epsilon = (0.5 * epsilon).max(floor);
    }

    let bias: Vec<f64> = (0..target.len())
        .map(|j| {
            if lb[j] > f64::NEG_INFINITY {
                target.node(j, &mut p);
                let sq: f64 = p.iter().map(|v| v * v).sum();
                lb[j] + (g[j] - 0.5 * sq) / epsilon
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let boundary_width = target.step.iter().cloned().fold(0.0, f64::max);
    let mut map = TransportMap {
        scales: scales.to_vec(),
        body: body.clone(),
        shift,
        target_mass,
        kind: MapKind::Grid(GridMap::new(epsilon, target, bias, &source)),
        diagnostics: Diagnostics { solver: SolverKind::Grid, discrepancy: f64::NAN, epsilon, iterations, stages, boundary_width },
    };
    let tv = sampled_discrepancy(&map, &oracle, opts.tv_samples, opts.seed)?;
    map.diagnostics.discrepancy = tv;
    if tv > opts.tv_target {
        return Err(Error::NotConverged { iterations, best: format!("discrepancy {tv:e}") });
    }
    Ok(map)
}

/// Total variation between the sampled pushforward and the target on the
/// `2^n` orthants around the midpoint of the body's bounding box.
fn sampled_discrepancy(map: &TransportMap, oracle: &MassOracle, samples: usize, seed: u64) -> Result<f64> {
    let n = map.dim();
    let body = &map.body;
    let (lo, hi) = body.bounding_box()?;
    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let total = oracle.mass(body)?;
    let mut target = vec![0.0; 1 << n];
    for (cell, slot) in target.iter_mut().enumerate() {
        let mut piece = body.clone();
        for d in 0..n {
            let mut e = vec![0.0; n];
            e[d] = if cell >> d & 1 == 0 { 1.0 } else { -1.0 };
            piece = piece.with_cut(&e, e[d] * mid[d])?;
        }
        *slot = match oracle.mass(&piece) {
            Ok(v) => v / total,
            Err(Error::Degenerate(_)) => 0.0,
            Err(e) => return Err(e),
        };
    }
    let source = map.source_measure()?;
    let counts = rng::chunked(samples, seed ^ 0x7d15, |r, len| {
        let mut counts = vec![0usize; 1 << n];
        let mut x = vec![0.0; n];
        for _ in 0..len {
            source.sample_continuous(r, &mut x);
            let y = map.evaluate(&x);
            let mut cell = 0;
            for d in 0..n {
                if y[d] - map.shift[d] > mid[d] {
                    cell |= 1 << d;
                }
            }
            counts[cell] += 1;
        }
        counts
    });
    let mut hist = vec![0.0; 1 << n];
    for c in counts {
        for (h, v) in hist.iter_mut().zip(c) {
            *h += v as f64;
        }
    }
    Ok(0.5 * hist.iter().zip(&target).map(|(h, t)| (h / samples as f64 - t).abs()).sum::<f64>())
}

/// Result of sampling point pairs from the source.
#[derive(Clone, Debug, Serialize)]
pub struct LipschitzAudit {
    pub pairs: usize,
    /// `max |T(x) − T(y)| / |x − y|`.
    pub max_ratio: f64,
    /// `min ⟨T(x) − T(y), x − y⟩`.
    pub min_monotone: f64,
}

pub fn lipschitz_audit(map: &TransportMap, pair_count: usize, seed: u64) -> Result<LipschitzAudit> {
    let n = map.dim();
    let source = map.source_measure()?;
    let batch = source.sample(2 * pair_count, seed)?;
    let mut max_ratio: f64 = 0.0;
    let mut min_monotone = f64::INFINITY;
    for i in 0..pair_count {
        let x = batch.point(2 * i);
        let y = batch.point(2 * i + 1);
        let tx = map.evaluate(x);
        let ty = map.evaluate(y);
        let (mut dx, mut dt, mut inner) = (0.0, 0.0, 0.0);
        for d in 0..n {
            let a = x[d] - y[d];
            let b = tx[d] - ty[d];
            dx += a * a;
            dt += b * b;
            inner += a * b;
        }
        if dx > 0.0 {
            max_ratio = max_ratio.max((dt / dx).sqrt());
        }
        min_monotone = min_monotone.min(inner);
    }
    Ok(LipschitzAudit { pairs: pair_count, max_ratio, min_monotone })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub used: usize,
    /// Points whose image lies within one grid cell of the boundary.
    pub excluded: usize,
}

/// Residual of `ln det D²U(x) = P(∇U(x)) − Q(x)`, where `e^{−Q}` and `e^{−P}`
/// are the normalized source and target densities, with `D²U` by central
/// differences of the map.
pub fn ma_residual(map: &TransportMap, points: &[Vec<f64>]) -> Result<ResidualStats> {
    let scales = map.scales();
    let width = map.diagnostics.boundary_width;
    let step = match map.diagnostics.solver {
        SolverKind::Product => 1e-4,
        SolverKind::Grid => 1e-3,
    } * scales.iter().map(|a| (0.5 / a).sqrt()).fold(f64::INFINITY, f64::min);
    let ln_mass = map.target_mass.ln();
    let (mut max_abs, mut sum, mut used, mut excluded) = (0.0f64, 0.0, 0, 0);
    for x in points {
        if x.len() != map.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residual test point"));
        }
        let y = map.evaluate(x);
        let local: Vec<f64> = y.iter().zip(&map.shift).map(|(a, s)| a - s).collect();
        if map.body.margin(&local) <= width {
            excluded += 1;
            continue;
        }
        let det = map.jacobian(x, step).determinant();
        if !(det > 0.0) {
            excluded += 1;
            continue;
        }
        let p: f64 = scales.iter().zip(&local).map(|(a, v)| a * v * v).sum::<f64>() + ln_mass;
        let q: f64 = scales.iter().zip(x).map(|(a, v)| a * v * v).sum();
        let r = (det.ln() - p + q).abs();
        max_abs = max_abs.max(r);
        sum += r;
        used += 1;
    }
    let mean_abs = if used > 0 { sum / used as f64 } else { f64::NAN };
    Ok(ResidualStats { max_abs, mean_abs, used, excluded })
}

/// Regular grid of `per_axis^n` points in `[−half_width, half_width]^n`.
pub fn test_points(n: usize, half_width: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut s| {
            (0..n)
                .map(|_| {
                    let i = s % per_axis;
                    s /= per_axis;
                    if per_axis == 1 {
                        0.0
                    } else {
                        -half_width + 2.0 * half_width * i as f64 / (per_axis - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LogDetCheck {
    /// Coefficient of `t²` in `ln det(Δ0 + Δ1 t + Δ2 t²)` by finite differences.
    pub fd_coeff: f64,
    /// `tr B + tr Λ²A − (tr A)²/2` with `A = Δ0^{-1/2} Δ1 Δ0^{-1/2}`, `B` likewise.
    pub formula_coeff: f64,
    pub trace_b: f64,
    /// `tr Λ²A − (tr A)²/2`.
    pub invariant_gap: f64,
    /// `−Σ s_i²/2` over the eigenvalues of `A`.
    pub eigen_gap: f64,
}

pub fn logdet_expansion_check(d0: &DMatrix<f64>, d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> Result<LogDetCheck> {
    let n = d0.nrows();
    if d0.ncols() != n || d1.shape() != (n, n) || d2.shape() != (n, n) {
        return Err(invalid("matrices must be square of one size"));
    }
    let sym = |m: &DMatrix<f64>| (m + m.transpose()) * 0.5;
    let (d0, d1, d2) = (sym(d0), sym(d1), sym(d2));
    let eig = SymmetricEigen::new(d0.clone());
    if eig.eigenvalues.iter().any(|v| *v <= 0.0) {
        return Err(invalid("base matrix must be positive definite"));
    }
    let inv_sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt())) * eig.eigenvectors.transpose();
    let a = &inv_sqrt * &d1 * &inv_sqrt;
    let b = &inv_sqrt * &d2 * &inv_sqrt;
    let tr_a = a.trace();
    let mut wedge = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            wedge += a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(j, i)];
        }
    }
    let invariant_gap = wedge - 0.5 * tr_a * tr_a;
    let eigen_gap = -0.5 * SymmetricEigen::new(a.clone()).eigenvalues.iter().map(|s| s * s).sum::<f64>();
    let f = |t: f64| (&d0 + &d1 * t + &d2 * (t * t)).determinant().ln();
    let second = |h: f64| (f(h) - 2.0 * f(0.0) + f(-h)) / (2.0 * h * h);
    let h = 1e-3;
    let fd_coeff = (4.0 * second(h / 2.0) - second(h)) / 3.0;
    Ok(LogDetCheck { fd_coeff, formula_coeff: b.trace() + invariant_gap, trace_b: b.trace(), invariant_gap, eigen_gap })
}

/// `|c(P) − c(P')|` where `P'` moves offset `i` of `P` by `eps · pattern[i]`.
pub fn center_stability(scales: &[f64], body: &ConvexBody, eps: f64, pattern: &[f64], opts: &TransportOptions) -> Result<f64> {
    if pattern.len() != body.halfspaces.len() {
        return Err(invalid("one perturbation weight per half-space"));
    }
    if pattern.iter().any(|w| w.abs() > 1.0) || !(eps >= 0.0) {
        return Err(invalid("perturbation weights must lie in [-1, 1] and eps must be nonnegative"));
    }
    let mut moved = body.clone();
    for (h, w) in moved.halfspaces.iter_mut().zip(pattern) {
        h.offset += eps * w;
    }
    moved.interior_point()?;
    let c0 = solve_monotone_transport(scales, body, opts)?.center();
    let c1 = solve_monotone_transport(scales, &moved, opts)?.center();
    Ok(c0.iter().zip(&c1).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Largest pancake parameter `ε²/(4(R+ε))` for which a `δ`-close pancake
/// keeps its map within `ε` of the flat approximation.
pub fn pancake_parameter_bound(eps: f64, radius: f64) -> f64 {
    eps * eps / (4.0 * (radius + eps))
}

pub fn pancake_parameter_ok(delta: f64, eps: f64, radius: f64) -> bool {
    delta < pancake_parameter_bound(eps, radius)
}

/// For convex `U, V` with second derivatives in `[0, 1]`, `|U − V| ≤ η` on
/// `[x − √(2η), x + √(2η)]` forces `|U'(x) − V'(x)| ≤ √(2η)`.
pub fn gradient_gap_bound(value_gap: f64) -> f64 {
    (2.0 * value_gap.max(0.0)).sqrt()
}

/// Uniform random unit vector; used by callers building random test bodies.
pub fn random_unit(n: usize, r: &mut rng::Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let s: f64 = v.iter().map(|x| x * x).sum();
        if s > 1e-6 && s <= 1.0 {
            return v.iter().map(|x| x / s.sqrt()).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::normal_pdf;
    use proptest::prelude::*;

    fn half_line() -> TransportMap {
        let body = ConvexBody::new(1, 12.0, vec![(vec![1.0], 0.0)]).unwrap();
        solve_monotone_transport(&[0.5], &body, &TransportOptions::default()).unwrap()
    }

    #[test]
    fn half_line_center_is_quarter_quantile() {
        let map = half_line();
        assert_eq!(map.diagnostics.solver, SolverKind::Product);
        let c = map.center()[0];
        let oracle = statrs::distribution::ContinuousCDF::inverse_cdf(&statrs::distribution::Normal::standard(), 0.25);
        assert!((c - oracle).abs() < 1e-12, "{c} vs {oracle}");
        assert!(map.diagnostics.discrepancy < 1e-6);
    }

    #[test]
    fn half_line_derivative_matches_closed_form() {
        let map = half_line();
        let MapKind::Product(maps) = &map.kind else { unreachable!() };
        for i in 0..=40 {
            let x = -4.0 + 0.2 * i as f64;
            let t = maps[0].map(x);
            // T'(x) = φ(x) / (2 φ(T(x))) for the standard normal onto x ≤ 0
            let exact = normal_pdf(x) / (2.0 * normal_pdf(t));
            assert!((maps[0].derivative(x) - exact).abs() < 1e-12 * exact.max(1.0));
            assert!(maps[0].derivative(x) <= 1.0);
        }
    }

    #[test]
    fn unrestricted_box_gives_identity() {
        let body = ConvexBody::aligned_box(&[-9.0, -9.0], &[9.0, 9.0], 20.0).unwrap();
        let map = solve_monotone_transport(&[0.5, 0.5], &body, &TransportOptions::default()).unwrap();
        for x in test_points(2, 3.0, 7) {
            let y = map.evaluate(&x);
            assert!((y[0] - x[0]).abs() < 1e-6 && (y[1] - x[1]).abs() < 1e-6);
            let u = map.potential(&x) - 0.5 * (x[0] * x[0] + x[1] * x[1]);
            assert!(u.abs() < 1e-6, "{u}");
        }
    }

    #[test]
    fn half_line_residual_vanishes() {
        let map = half_line();
        let pts: Vec<Vec<f64>> = (0..=80).map(|i| vec![-2.0 + 0.05 * i as f64]).collect();
        let r = ma_residual(&map, &pts).unwrap();
        assert_eq!(r.used, pts.len());
        assert!(r.max_abs < 1e-6, "{r:?}");
    }

    #[test]
    fn half_line_audit() {
        let map = half_line();
        let a = lipschitz_audit(&map, 100_000, 3).unwrap();
        assert!(a.max_ratio <= 1.0 + 1e-9, "{a:?}");
        assert!(a.min_monotone >= -1e-9);
    }

    #[test]
    fn half_line_stability_is_closed_form() {
        let body = ConvexBody::new(1, 12.0, vec![(vec![1.0], 0.0)]).unwrap();
        let opts = TransportOptions::default();
        for eps in [0.1, 0.05, 0.025] {
            let d = center_stability(&[0.5], &body, eps, &[1.0], &opts).unwrap();
            let exact = normal_quantile(normal_cdf(eps) / 2.0) - normal_quantile(0.25);
            assert!((d - exact).abs() < 1e-10, "{d} {exact}");
        }
        assert_eq!(center_stability(&[0.5], &body, 0.0, &[1.0], &opts).unwrap(), 0.0);
    }

    #[test]
    fn logdet_scalar_case() {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let c = logdet_expansion_check(&one(1.0), &one(0.7), &one(-0.3)).unwrap();
        assert!((c.formula_coeff - (-0.3 - 0.49 / 2.0)).abs() < 1e-14);
        assert!((c.fd_coeff - c.formula_coeff).abs() < 1e-8);
        let z = logdet_expansion_check(&one(2.0), &one(0.0), &one(0.0)).unwrap();
        assert!(z.fd_coeff.abs() < 1e-9 && z.formula_coeff == 0.0);
        assert!(logdet_expansion_check(&one(-1.0), &one(0.0), &one(0.0)).is_err());
    }

    #[test]
    fn pancake_parameter_helper() {
        assert!((pancake_parameter_bound(0.2, 6.0) - 0.04 / 24.8).abs() < 1e-15);
        assert!(pancake_parameter_ok(1e-3, 0.2, 6.0));
        assert!(!pancake_parameter_ok(2e-3, 0.2, 6.0));
    }

    #[test]
    fn polygon_clip_area() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tri = clip(&sq, [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()], 1.0 / 2f64.sqrt());
        let (a, cx, cy) = polygon_moments(&tri);
        assert!((a - 0.5).abs() < 1e-14 && (cx - 1.0 / 3.0).abs() < 1e-14 && (cy - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn line_transform_matches_full_sum() {
        let mut r = rng::aux_stream(5, 0x11);
        let m = 48;
        for _ in 0..20 {
            let curv = 0.05 + r.random::<f64>();
            let mid = r.random::<f64>() * m as f64;
            let cut = r.random_range(0..8usize);
            let a: Vec<f64> = (0..m)
                .map(|i| if i < cut || i + cut >= m { f64::NEG_INFINITY } else { -curv * (i as f64 - mid).powi(2) })
                .collect();
            let eps = 0.02 + r.random::<f64>();
            let k: Vec<f64> = (0..m * m)
                .map(|f| {
                    let (j, i) = (f / m, f % m);
                    -(0.1 * (j as f64 - i as f64)).powi(2) / (2.0 * eps)
                })
                .collect();
            let (mut fast, mut full) = (vec![0.0; m], vec![0.0; m]);
            lse_line(&a, &k, &mut fast);
            lse_line_full(&a, &k, &mut full);
            for (x, y) in fast.iter().zip(&full) {
                assert!((x - y).abs() < 1e-12, "{x} {y}");
            }
        }
    }

    #[test]
    fn windowed_evaluation_matches_full_scan() {
        let body = ConvexBody::new(2, 12.0, vec![(vec![1.0, 0.3], 0.4), (vec![-0.5, 1.0], 0.7), (vec![-0.2, -1.0], 1.1)]).unwrap();
        let opts = TransportOptions { resolution: 48, ..TransportOptions::default() };
        let map = solve_monotone_transport(&[0.5, 1.0], &body, &opts).unwrap();
        let MapKind::Grid(grid) = &map.kind else { panic!("expected the grid solver") };
        for x in test_points(2, 4.0, 9) {
            let a = grid.evaluate(&x);
            let b = grid.evaluate_full(&x);
            assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10, "{x:?} {a:?} {b:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Two 1-D Brenier potentials have second derivatives in [0, 1], so a
        // uniform value gap η bounds the slope gap by √(2η).
        #[test]
        fn gradient_lemma_on_interval_potentials(
            lo1 in -3.0f64..-0.2, hi1 in 0.2f64..3.0, lo2 in -3.0f64..-0.2, hi2 in 0.2f64..3.0, x in -1.0f64..1.0,
        ) {
            let u = IntervalMap::new(0.5, lo1, hi1).unwrap();
            let v = IntervalMap::new(0.5, lo2, hi2).unwrap();
            let gap = |s: f64| (u.potential(s) - v.potential(s)) - (u.potential(x) - v.potential(x));
            let slope = (u.map(x) - v.map(x)).abs();
            // normalize the constant so the value gap is measured around x
            let window = 2.5;
            let eta = (0..=200).map(|i| gap(x - window + 2.0 * window * i as f64 / 200.0).abs()).fold(0.0f64, f64::max);
            let reach = gradient_gap_bound(eta);
            prop_assume!(reach <= window);
            prop_assert!(slope <= reach + 1e-9, "slope {} bound {}", slope, reach);
        }

        #[test]
        fn logdet_gap_is_nonpositive(seed in 0u64..1000) {
            let mut r = rng::aux_stream(seed, 0x1d);
            let mut m = |s: f64| DMatrix::from_fn(3, 3, |_, _| s * (r.random::<f64>() * 2.0 - 1.0));
            let g = m(1.0);
            let d0 = &g * g.transpose() + DMatrix::identity(3, 3);
            let c = logdet_expansion_check(&d0, &m(1.0), &m(1.0)).unwrap();
            prop_assert!(c.invariant_gap <= 1e-12);
            prop_assert!((c.invariant_gap - c.eigen_gap).abs() < 1e-10);
            prop_assert!(c.fd_coeff <= c.trace_b + 1e-6);
        }
    }
}
