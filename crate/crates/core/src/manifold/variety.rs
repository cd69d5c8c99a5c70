//! Projective hypersurfaces given by one homogeneous polynomial, handled
//! through their circle-invariant lift to the unit sphere of `C^{n+1}`.
//!
//! A point of `CP^n` is stored as a unit vector of `R^{2n+2}` with the real
//! and imaginary parts of `z_j` at positions `2j` and `2j + 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::constrained::{self, ConstraintSet, Workspace};
use crate::rng;

/// Starts per variety distance search.
pub const VARIETY_STARTS: usize = 16;
/// Step cap per start.
const VARIETY_STEPS: usize = 6;
/// Points in the precomputed cloud that seeds the searches.
const CLOUD_SIZE: usize = 1024;
/// Largest number of homogeneous variables handled.
pub const MAX_VARS: usize = 8;
/// Seeds this close to a reached point are not searched again.
const SAME_BASIN: f64 = 0.15;

/// `coefficient · Π z_j^{e_j}` with a complex coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub exponents: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    fn monomial(coef: f64, exponents: Vec<u32>) -> Term {
        Term { re: coef, im: 0.0, exponents }
    }

    /// The coordinate hyperplane `z_index = 0` in `CP^n`.
    pub fn coordinate(n: usize, index: usize) -> Self {
        let mut e = vec![0; n + 1];
        e[index] = 1;
        Polynomial { terms: vec![Self::monomial(1.0, e)] }
    }

    /// The smooth conic `z_0 z_2 − z_1²` in `CP^2`.
    pub fn conic() -> Self {
        Polynomial { terms: vec![Self::monomial(1.0, vec![1, 0, 1]), Self::monomial(-1.0, vec![0, 2, 0])] }
    }

    /// The Fermat curve `z_0^d + z_1^d + z_2^d` in `CP^2`.
    pub fn fermat(degree: u32) -> Self {
        let terms = (0..3)
            .map(|i| {
                let mut e = vec![0; 3];
                e[i] = degree;
                Self::monomial(1.0, e)
            })
            .collect();
        Polynomial { terms }
    }

    /// Common total degree of the terms.
    pub fn degree(&self) -> Result<u32> {
        let first = self.terms.first().ok_or_else(|| invalid("polynomial has no terms"))?;
        let d: u32 = first.exponents.iter().sum();
        if self.terms.iter().any(|t| t.exponents.iter().sum::<u32>() != d) {
            return Err(invalid("polynomial is not homogeneous"));
        }
        Ok(d)
    }

    fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.re.hypot(t.im)).sum()
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().zip(z).fold(Complex64::new(t.re, t.im), |acc, (e, v)| acc * v.powu(*e)))
            .sum()
    }

    /// Holomorphic Hessian, row-major.
    pub fn hessian(&self, z: &[Complex64], out: &mut [Complex64]) {
        let v = z.len();
        out.iter_mut().for_each(|h| *h = Complex64::new(0.0, 0.0));
        for t in &self.terms {
            let c = Complex64::new(t.re, t.im);
            for j in 0..v {
                for k in j..v {
                    let (ej, ek) = (t.exponents[j], t.exponents[k]);
                    let factor = if j == k { ej * ej.saturating_sub(1) } else { ej * ek };
                    if factor == 0 {
                        continue;
                    }
                    let mut h = c * factor as f64;
                    for (i, zi) in z.iter().enumerate() {
                        let mut e = t.exponents[i];
                        if i == j {
                            e -= 1;
                        }
                        if i == k {
                            e -= 1;
                        }
                        h *= zi.powu(e);
                    }
                    out[j * v + k] += h;
                    if j != k {
                        out[k * v + j] += h;
                    }
                }
            }
        }
    }

    /// Value and holomorphic gradient.
    pub fn eval_grad(&self, z: &[Complex64], grad: &mut [Complex64]) -> Complex64 {
        grad.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
        let mut value = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let c = Complex64::new(t.re, t.im);
            let mut powers = [Complex64::new(1.0, 0.0); MAX_VARS];
            for ((p, e), v) in powers.iter_mut().zip(&t.exponents).zip(z) {
                *p = v.powu(*e);
            }
            let powers = &powers[..z.len()];
            value += powers.iter().fold(c, |acc, p| acc * p);
            for (j, e) in t.exponents.iter().enumerate() {
                if *e == 0 {
                    continue;
                }
                let mut g = c * (*e as f64) * z[j].powu(e - 1);
                for (i, p) in powers.iter().enumerate() {
                    if i != j {
                        g *= p;
                    }
                }
                grad[j] += g;
            }
        }
        value
    }
}

pub(crate) fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn to_complex_array(x: &[f64]) -> [Complex64; MAX_VARS] {
    let mut z = [Complex64::new(0.0, 0.0); MAX_VARS];
    for (v, c) in z.iter_mut().zip(x.chunks(2)) {
        *v = Complex64::new(c[0], c[1]);
    }
    z
}

fn to_real(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// `Σ conj(a_j) b_j` on lifted vectors.
pub(crate) fn hermitian(a: &[f64], b: &[f64]) -> Complex64 {
    a.chunks(2).zip(b.chunks(2)).map(|(p, q)| Complex64::new(p[0], -p[1]) * Complex64::new(q[0], q[1])).sum()
}

/// Fubini–Study distance between the classes of two unit lifts, from the
/// parts of `b` along and across the complex line of `a`.
pub fn fubini_study(a: &[f64], b: &[f64]) -> f64 {
    let c = hermitian(a, b);
    let across: f64 = a
        .chunks(2)
        .zip(b.chunks(2))
        .map(|(p, q)| (Complex64::new(q[0], q[1]) - c * Complex64::new(p[0], p[1])).norm_sqr())
        .sum();
    across.sqrt().atan2(c.norm())
}

/// The lift `{P = 0} ∩ S^{2n+1}` as a real constraint set.
struct LiftedSet<'a> {
    poly: &'a Polynomial,
    vars: usize,
}

impl ConstraintSet for LiftedSet<'_> {
    fn ambient_dim(&self) -> usize {
        2 * self.vars
    }

    fn constraints(&self) -> usize {
        3
    }

    fn residual(&self, x: &[f64], res: &mut [f64], jac: &mut [f64]) {
        let z = to_complex_array(x);
        let mut g = [Complex64::new(0.0, 0.0); MAX_VARS];
        let p = self.poly.eval_grad(&z[..self.vars], &mut g[..self.vars]);
        let w = 2 * self.vars;
        res[0] = p.re;
        res[1] = p.im;
        res[2] = (x.iter().map(|v| v * v).sum::<f64>() - 1.0) / 2.0;
        for (j, gj) in g[..self.vars].iter().enumerate() {
            jac[2 * j] = gj.re;
            jac[2 * j + 1] = -gj.im;
            jac[w + 2 * j] = gj.im;
            jac[w + 2 * j + 1] = gj.re;
        }
        jac[2 * w..3 * w].copy_from_slice(x);
    }

    fn weighted_hessian(&self, x: &[f64], mult: &[f64], out: &mut [f64]) -> bool {
        // μ_0 Re P + μ_1 Im P = Re(c P) with c = μ_0 − i μ_1
        let v = self.vars;
        let w = 2 * v;
        let mut k = [Complex64::new(0.0, 0.0); MAX_VARS * MAX_VARS];
        self.poly.hessian(&to_complex_array(x)[..v], &mut k[..v * v]);
        let c = Complex64::new(mult[0], -mult[1]);
        for a in 0..v {
            for b in 0..v {
                let h = c * k[a * v + b];
                out[(2 * a) * w + 2 * b] = h.re;
                out[(2 * a) * w + 2 * b + 1] = -h.im;
                out[(2 * a + 1) * w + 2 * b] = -h.im;
                out[(2 * a + 1) * w + 2 * b + 1] = -h.re;
            }
        }
        for d in 0..w {
            out[d * w + d] += mult[2];
        }
        true
    }
}

/// Roots of `Σ c_j s^j` by simultaneous Weierstrass iteration.
fn polynomial_roots(c: &[Complex64]) -> Option<Vec<Complex64>> {
    let d = c.len() - 1;
    let lead = c[d];
    if lead.norm() <= 1e-12 * c.iter().map(|v| v.norm()).fold(0.0, f64::max) {
        return None;
    }
    let monic: Vec<Complex64> = c.iter().map(|v| v / lead).collect();
    let eval = |s: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * s + a);
    let radius = 1.0 + monic[..d].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut r: Vec<Complex64> = (0..d).map(|i| seed.powu(i as u32) * radius / (1.0 + i as f64).sqrt()).collect();
    for _ in 0..1000 {
        let mut moved = 0.0f64;
        for i in 0..d {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if j != i {
                    den *= r[i] - r[j];
                }
            }
            let step = eval(r[i]) / den;
            if !step.is_finite() {
                return None;
            }
            r[i] -= step;
            moved = moved.max(step.norm() / (1.0 + r[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    Some(r)
}

/// The polynomial restricted to the complex line `a + s b`, as coefficients
/// in `s` recovered from values at the roots of unity.
fn restrict_to_line(poly: &Polynomial, d: u32, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let m = d as usize + 1;
    let values: Vec<Complex64> = (0..m)
        .map(|k| {
            let w = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64);
            let z: Vec<Complex64> = a.iter().zip(b).map(|(p, q)| p + w * q).collect();
            poly.eval(&z)
        })
        .collect();
    (0..m)
        .map(|j| {
            values.iter().enumerate().map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / m as f64)).sum::<Complex64>()
                / m as f64
        })
        .collect()
}

fn random_complex(vars: usize, rng: &mut rng::Rng) -> Vec<Complex64> {
    (0..vars).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

/// A hypersurface of `CP^n` with a cloud of points on it.
#[derive(Clone, Debug)]
pub struct Variety {
    pub n: usize,
    pub poly: Polynomial,
    pub degree: u32,
    cloud: Vec<Vec<f64>>,
}

impl Variety {
    pub fn new(n: usize, poly: Polynomial, seed: u64) -> Result<Self> {
        if n == 0 || n + 1 > MAX_VARS {
            return Err(invalid(format!("need 1 <= n <= {}", MAX_VARS - 1)));
        }
        let degree = poly.degree()?;
        if degree == 0 {
            return Err(invalid("constant polynomial"));
        }
        if poly.terms.iter().any(|t| t.exponents.len() != n + 1) {
            return Err(invalid("every term needs n + 1 exponents"));
        }
        if poly.terms.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficient"));
        }
        let mut v = Variety { n, poly, degree, cloud: Vec::new() };
        if degree > 1 {
            v.cloud = v.sample_points(CLOUD_SIZE, seed)?;
        }
        Ok(v)
    }

    pub fn vars(&self) -> usize {
        self.n + 1
    }

    /// Points of the variety from random line sections, each polished onto
    /// the lift by Newton projection. Line sections sample the variety
    /// proportionally to its volume.
    pub fn sample_points(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let set = LiftedSet { poly: &self.poly, vars: self.vars() };
        let mut ws = Workspace::new(&set);
        let mut rng = rng::aux_stream(seed, 0x5ec7);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count {
            tries += 1;
            if tries > 100 * count + 100 {
                return Err(Error::Degenerate("line sections do not meet the variety".into()));
            }
            let a = random_complex(self.vars(), &mut rng);
            let b = random_complex(self.vars(), &mut rng);
            let c = restrict_to_line(&self.poly, self.degree, &a, &b);
            let Some(roots) = polynomial_roots(&c) else { continue };
            for s in roots {
                let z: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p + s * q).collect();
                let len = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let mut x: Vec<f64> = to_real(&z).iter().map(|v| v / len).collect();
                if constrained::project(&set, &mut x, &mut ws) && out.len() < count {
                    out.push(x);
                }
            }
        }
        Ok(out)
    }

    /// Relative gradient size at `x`; zero exactly at singular points.
    pub fn gradient_ratio(&self, x: &[f64]) -> f64 {
        let z = to_complex(x);
        let mut g = vec![Complex64::new(0.0, 0.0); self.vars()];
        self.poly.eval_grad(&z, &mut g);
        g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / self.poly.coefficient_norm()
    }

    /// Residual `|P(x)|` relative to the coefficient size.
    pub fn membership_residual(&self, x: &[f64]) -> f64 {
        self.poly.eval(&to_complex(x)).norm() / self.poly.coefficient_norm()
    }

    /// Fubini–Study distance from the class of the unit lift `x`, which is
    /// also the spherical distance from `x` to the lifted variety. Linear
    /// equations use the closed form; otherwise the best of the projected
    /// searches seeded from the cloud points closest to `x`, or `+∞` when
    /// none converges.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.distance_above(x, 0.0)
    }

    /// Like [`Variety::distance`], but stops searching once a distance at or
    /// below `floor` is found. Seeds lying close to a point already reached
    /// are skipped since they descend to the same minimizer.
    pub fn distance_above(&self, x: &[f64], floor: f64) -> f64 {
        if self.degree == 1 {
            let z = to_complex(x);
            let mut g = vec![Complex64::new(0.0, 0.0); self.vars()];
            let p = self.poly.eval_grad(&z, &mut g);
            let len = g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            return (p.norm() / len).min(1.0).asin();
        }
        let set = LiftedSet { poly: &self.poly, vars: self.vars() };
        let mut ws = Workspace::new(&set);
        let mut near: Vec<(f64, usize)> = self.cloud.iter().enumerate().map(|(i, w)| (hermitian(w, x).norm(), i)).collect();
        let k = VARIETY_STARTS.min(near.len());
        near.select_nth_unstable_by(k - 1, |p, q| q.0.total_cmp(&p.0));
        near[..k].sort_by(|p, q| q.0.total_cmp(&p.0));
        let mut best = f64::INFINITY;
        let mut reached: Vec<Vec<f64>> = Vec::new();
        for &(_, i) in &near[..k] {
            let w = &self.cloud[i];
            if reached.iter().any(|r| fubini_study(r, w) < SAME_BASIN) {
                continue;
            }
            // rotate the start into phase with x
            let c = hermitian(w, x);
            let phase = if c.norm() > 0.0 { c / c.norm() } else { Complex64::new(1.0, 0.0) };
            let mut z = to_real(&to_complex(w).iter().map(|v| v * phase).collect::<Vec<_>>());
            if constrained::descend(&set, x, &mut z, &mut ws, VARIETY_STEPS) {
                constrained::newton_polish(&set, x, &mut z, &mut ws);
                best = best.min(fubini_study(x, &z));
                if best <= floor {
                    break;
                }
                reached.push(z);
            }
        }
        best
    }

    /// Average number of distinct points in which random complex lines meet
    /// the variety.
    pub fn line_intersection_mean(&self, lines: usize, seed: u64) -> Result<f64> {
        if lines == 0 {
            return Err(invalid("need at least one line"));
        }
        let mut rng = rng::aux_stream(seed, 0xc40f);
        let mut total = 0usize;
        for _ in 0..lines {
            let a = random_complex(self.vars(), &mut rng);
            let b = random_complex(self.vars(), &mut rng);
            let c = restrict_to_line(&self.poly, self.degree, &a, &b);
            let Some(roots) = polynomial_roots(&c) else { continue };
            let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let mut found: Vec<Complex64> = Vec::new();
            for s in roots {
                let val = c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * s + a);
                let size = (0..c.len()).map(|j| s.norm().powi(j as i32)).sum::<f64>();
                let genuine = val.norm() <= 1e-9 * scale * size;
                let distinct = found.iter().all(|f| (f - s).norm() > 1e-7 * (1.0 + s.norm()));
                if genuine && distinct {
                    found.push(s);
                }
            }
            total += found.len();
        }
        Ok(total as f64 / lines as f64)
    }
}

/// Circle action `x ↦ e^{iθ} x` on a lift.
pub fn rotate_phase(x: &[f64], theta: f64) -> Vec<f64> {
    let r = Complex64::from_polar(1.0, theta);
    to_real(&to_complex(x).iter().map(|v| v * r).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(z: &[Complex64]) -> Vec<f64> {
        let len = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        to_real(z).iter().map(|v| v / len).collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = Polynomial::fermat(4);
        let z = vec![Complex64::new(0.3, -0.2), Complex64::new(0.7, 0.1), Complex64::new(-0.4, 0.5)];
        let mut g = vec![Complex64::new(0.0, 0.0); 3];
        p.eval_grad(&z, &mut g);
        let h = 1e-6;
        for j in 0..3 {
            let mut zp = z.clone();
            zp[j] += h;
            let mut zm = z.clone();
            zm[j] -= h;
            let fd = (p.eval(&zp) - p.eval(&zm)) / (2.0 * h);
            assert!((fd - g[j]).norm() < 1e-8, "{j} {fd} {}", g[j]);
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let p = Polynomial::fermat(4);
        let z = vec![Complex64::new(0.3, -0.2), Complex64::new(0.7, 0.1), Complex64::new(-0.4, 0.5)];
        let mut h = vec![Complex64::new(0.0, 0.0); 9];
        p.hessian(&z, &mut h);
        let grad = |z: &[Complex64]| {
            let mut g = vec![Complex64::new(0.0, 0.0); 3];
            p.eval_grad(z, &mut g);
            g
        };
        let step = 1e-6;
        for k in 0..3 {
            let mut zp = z.clone();
            zp[k] += step;
            let mut zm = z.clone();
            zm[k] -= step;
            let (gp, gm) = (grad(&zp), grad(&zm));
            for j in 0..3 {
                let fd = (gp[j] - gm[j]) / (2.0 * step);
                assert!((fd - h[j * 3 + k]).norm() < 1e-7, "{j} {k}");
            }
        }
    }

    #[test]
    fn homogeneity_is_enforced() {
        let bad = Polynomial { terms: vec![Term { re: 1.0, im: 0.0, exponents: vec![2, 0, 0] }, Term { re: 1.0, im: 0.0, exponents: vec![0, 1, 0] }] };
        assert!(bad.degree().is_err());
        assert!(Variety::new(2, bad, 1).is_err());
        let z = vec![Complex64::new(0.3, 0.4), Complex64::new(-0.1, 0.9), Complex64::new(0.5, 0.0)];
        let lam = Complex64::new(0.7, -1.3);
        let scaled: Vec<Complex64> = z.iter().map(|v| v * lam).collect();
        let p = Polynomial::conic();
        assert!((p.eval(&scaled) - lam.powu(2) * p.eval(&z)).norm() < 1e-12);
    }

    #[test]
    fn roots_of_a_known_cubic() {
        // (s − 1)(s + 2)(s − i)
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let c = [2.0 * i, -2.0 - i, one - i, one];
        let mut r = polynomial_roots(&c).unwrap();
        r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let expect = [Complex64::new(-2.0, 0.0), i, one];
        for (a, b) in r.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn line_distance_is_the_polar_angle() {
        let v = Variety::new(2, Polynomial::coordinate(2, 1), 1).unwrap();
        let x = unit(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert!((v.distance(&x) - PI / 2.0).abs() < 1e-12);
        let on = unit(&[Complex64::new(0.6, 0.1), Complex64::new(0.0, 0.0), Complex64::new(0.0, -0.8)]);
        assert!(v.distance(&on) < 1e-12);
    }

    #[test]
    fn cloud_points_lie_on_the_conic() {
        let v = Variety::new(2, Polynomial::conic(), 3).unwrap();
        for x in v.sample_points(100, 9).unwrap() {
            assert!((x.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(v.membership_residual(&x) < 1e-10);
            assert!(v.distance(&x) < 1e-6);
        }
    }

    #[test]
    fn conic_search_matches_a_parametrized_minimum() {
        // the conic is the image of [s:t] ↦ [s²:st:t²]
        let v = Variety::new(2, Polynomial::conic(), 4).unwrap();
        let mut rng = rng::stream(11, 0);
        for _ in 0..20 {
            let x = unit(&random_complex(3, &mut rng));
            let d = v.distance(&x);
            let mut brute = f64::INFINITY;
            for i in 0..200 {
                for j in 0..200 {
                    let th = PI / 2.0 * i as f64 / 199.0;
                    let ph = 2.0 * PI * j as f64 / 200.0;
                    let s = Complex64::new(th.cos(), 0.0);
                    let t = Complex64::from_polar(th.sin(), ph);
                    let w = unit(&[s * s, s * t, t * t]);
                    brute = brute.min(fubini_study(&x, &w));
                }
            }
            assert!(d <= brute + 1e-9, "{d} {brute}");
            assert!(d >= brute - 0.02, "{d} {brute}");
        }
    }

    #[test]
    fn generic_lines_meet_a_curve_in_degree_many_points() {
        for d in 1..=4 {
            let v = Variety::new(2, Polynomial::fermat(d), 5).unwrap();
            assert_eq!(v.line_intersection_mean(200, 6).unwrap(), d as f64);
        }
    }
}
