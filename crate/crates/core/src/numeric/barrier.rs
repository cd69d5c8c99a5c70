//! Log-barrier interior-point solver for the small convex programs used by
//! the geometry module: support-function LPs over `{⟨a_i,x⟩ ≤ c_i} ∩ B(R)`,
//! interior-point search, and the log-det maximization behind the John
//! ellipsoid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One barrier term; each encodes a constraint `slack(z) > 0` and contributes
/// `-log slack(z)` (or `-log det` for matrix constraints).
#[derive(Clone, Debug)]
pub enum Term {
    /// `offset - ⟨coef, z⟩ > 0`
    Linear { coef: DVector<f64>, offset: f64 },
    /// `offset - ⟨coef, z⟩ - |jac·z + shift|² > 0`
    Quadratic { coef: DVector<f64>, offset: f64, jac: DMatrix<f64>, shift: DVector<f64> },
    /// `offset - ⟨coef, z⟩ - |jac·z| > 0` with `jac·z ≠ 0` on the domain.
    Cone { coef: DVector<f64>, offset: f64, jac: DMatrix<f64> },
    /// `base + Σ z_p parts[p] ≻ 0`
    LogDet { base: DMatrix<f64>, parts: Vec<DMatrix<f64>> },
}

#[derive(Clone, Debug)]
pub enum Objective {
    /// minimize `⟨c, z⟩`
    Linear(DVector<f64>),
    /// minimize `-log det(base + Σ z_p parts[p])`
    NegLogDet { base: DMatrix<f64>, parts: Vec<DMatrix<f64>> },
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub dim: usize,
    pub objective: Objective,
    pub terms: Vec<Term>,
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Target duality-gap bound (`degree / τ`).
    pub gap: f64,
    pub growth: f64,
    pub max_newton: usize,
    /// Stop as soon as the objective drops below this value.
    pub stop_below: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Self { gap: 1e-10, growth: 8.0, max_newton: 200, stop_below: None }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub gap: f64,
    pub newton_steps: usize,
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn affine_matrix(base: &DMatrix<f64>, parts: &[DMatrix<f64>], z: &DVector<f64>) -> DMatrix<f64> {
    let mut m = base.clone();
    for (p, part) in parts.iter().enumerate() {
        if z[p] != 0.0 {
            m += part * z[p];
        }
    }
    m
}

/// `-log det` of an affine matrix with derivatives, or `None` outside the
/// positive-definite cone.
fn neg_log_det(base: &DMatrix<f64>, parts: &[DMatrix<f64>], z: &DVector<f64>, with_hess: bool) -> Option<Eval> {
    let m = affine_matrix(base, parts, z);
    let chol = m.clone().cholesky()?;
    let value = -2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !value.is_finite() {
        return None;
    }
    let inv = chol.inverse();
    let dim = z.len();
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    let products: Vec<DMatrix<f64>> = if with_hess { parts.iter().map(|p| &inv * p).collect() } else { Vec::new() };
    for (p, part) in parts.iter().enumerate() {
        grad[p] = -inv.component_mul(part).sum();
    }
    if with_hess {
        for p in 0..dim {
            for q in 0..=p {
                let v = (&products[p] * &products[q]).trace();
                hess[(p, q)] = v;
                hess[(q, p)] = v;
            }
        }
    }
    Some(Eval { value, grad, hess })
}

impl Term {
    fn degree(&self) -> f64 {
        match self {
            Term::LogDet { base, .. } => base.nrows() as f64,
            _ => 1.0,
        }
    }

    fn eval(&self, z: &DVector<f64>, with_hess: bool) -> Option<Eval> {
        let n = z.len();
        match self {
            Term::Linear { coef, offset } => {
                let s = offset - coef.dot(z);
                if s <= 0.0 {
                    return None;
                }
                let grad = coef / s;
                let hess = if with_hess { &grad * grad.transpose() } else { DMatrix::zeros(0, 0) };
                Some(Eval { value: -s.ln(), grad, hess })
            }
            Term::Quadratic { coef, offset, jac, shift } => {
                let v = jac * z + shift;
                let s = offset - coef.dot(z) - v.norm_squared();
                if s <= 0.0 {
                    return None;
                }
                // slack gradient = -coef - 2 Jᵀv, slack hessian = -2 JᵀJ
                let ds = -(coef + jac.transpose() * &v * 2.0);
                let grad = -&ds / s;
                let hess = if with_hess {
                    &ds * ds.transpose() / (s * s) + jac.transpose() * jac * (2.0 / s)
                } else {
                    DMatrix::zeros(0, 0)
                };
                Some(Eval { value: -s.ln(), grad, hess })
            }
            Term::Cone { coef, offset, jac } => {
                let v = jac * z;
                let nv = v.norm();
                let s = offset - coef.dot(z) - nv;
                if s <= 0.0 || nv == 0.0 {
                    return None;
                }
                let dn = jac.transpose() * &v / nv;
                let ds = -(coef + &dn);
                let grad = -&ds / s;
                let hess = if with_hess {
                    let proj = DMatrix::identity(v.len(), v.len()) - &v * v.transpose() / (nv * nv);
                    let d2n = jac.transpose() * proj * jac / nv;
                    &ds * ds.transpose() / (s * s) + d2n / s
                } else {
                    DMatrix::zeros(0, 0)
                };
                let _ = n;
                Some(Eval { value: -s.ln(), grad, hess })
            }
            Term::LogDet { base, parts } => neg_log_det(base, parts, z, with_hess),
        }
    }
}

impl Objective {
    fn eval(&self, z: &DVector<f64>, with_hess: bool) -> Option<Eval> {
        match self {
            Objective::Linear(c) => Some(Eval {
                value: c.dot(z),
                grad: c.clone(),
                hess: if with_hess { DMatrix::zeros(z.len(), z.len()) } else { DMatrix::zeros(0, 0) },
            }),
            Objective::NegLogDet { base, parts } => neg_log_det(base, parts, z, with_hess),
        }
    }
}

impl Problem {
    fn degree(&self) -> f64 {
        self.terms.iter().map(Term::degree).sum()
    }

    fn centered_value(&self, tau: f64, z: &DVector<f64>) -> Option<f64> {
        let mut v = tau * self.objective.eval(z, false)?.value;
        for t in &self.terms {
            v += t.eval(z, false)?.value;
        }
        Some(v)
    }

    fn centered(&self, tau: f64, z: &DVector<f64>) -> Option<Eval> {
        let obj = self.objective.eval(z, true)?;
        let mut value = tau * obj.value;
        let mut grad = obj.grad * tau;
        let mut hess = obj.hess * tau;
        for t in &self.terms {
            let e = t.eval(z, true)?;
            value += e.value;
            grad += e.grad;
            hess += e.hess;
        }
        Some(Eval { value, grad, hess })
    }

    /// Whether `z` lies strictly inside every constraint.
    pub fn is_interior(&self, z: &DVector<f64>) -> bool {
        self.objective.eval(z, false).is_some() && self.terms.iter().all(|t| t.eval(z, false).is_some())
    }

    pub fn objective_value(&self, z: &DVector<f64>) -> Option<f64> {
        self.objective.eval(z, false).map(|e| e.value)
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale = hess.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        if reg > 0.0 {
            for i in 0..n {
                h[(i, i)] += reg;
            }
        }
        if let Some(ch) = h.cholesky() {
            let step = -ch.solve(grad);
            if step.iter().all(|v| v.is_finite()) {
                return Some(step);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

/// Solves the problem from the strictly feasible point `z0`.
pub fn solve(problem: &Problem, z0: DVector<f64>, opts: Options) -> Result<Solution> {
    if z0.len() != problem.dim {
        return Err(Error::InvalidInput("barrier start has wrong dimension".into()));
    }
    if !problem.is_interior(&z0) {
        return Err(Error::Degenerate("barrier start is not strictly feasible".into()));
    }
    let degree = problem.degree().max(1.0);
    let mut z = z0;
    let mut tau = 1.0;
    let mut newton_total = 0usize;
    loop {
        // Centering step.
        for _ in 0..opts.max_newton {
            let e = problem.centered(tau, &z).expect("iterate stays interior");
            let Some(step) = newton_direction(&e.hess, &e.grad) else { break };
            let decrement = -e.grad.dot(&step);
            if decrement / 2.0 <= 1e-10 {
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-10 {
                let cand = &z + &step * alpha;
                if let Some(v) = problem.centered_value(tau, &cand) {
                    if v <= e.value - 0.25 * alpha * decrement {
                        z = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            newton_total += 1;
            // a damped step on a tiny decrement means the centered value is
            // flat to rounding, so further iterations cannot make progress
            let stalled = alpha < 1.0 && 0.25 * alpha * decrement <= 64.0 * f64::EPSILON * e.value.abs();
            if !moved || stalled {
                break;
            }
            if let Some(stop) = opts.stop_below {
                if problem.objective_value(&z).is_some_and(|v| v < stop) {
                    let objective = problem.objective_value(&z).unwrap_or(f64::NAN);
                    return Ok(Solution { z, objective, gap: degree / tau, newton_steps: newton_total });
                }
            }
        }
        if degree / tau < opts.gap {
            break;
        }
        if newton_total > 50 * opts.max_newton {
            let objective = problem.objective_value(&z).unwrap_or(f64::NAN);
            return Err(Error::NotConverged { iterations: newton_total, best: format!("{objective:e}") });
        }
        tau *= opts.growth;
    }
    let objective = problem.objective_value(&z).expect("interior");
    Ok(Solution { z, objective, gap: degree / tau, newton_steps: newton_total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_linear_over_disk() {
        // maximize x + y over the unit disk: optimum √2
        let terms = vec![Term::Quadratic {
            coef: DVector::zeros(2),
            offset: 1.0,
            jac: DMatrix::identity(2, 2),
            shift: DVector::zeros(2),
        }];
        let p = Problem { dim: 2, objective: Objective::Linear(DVector::from_vec(vec![-1.0, -1.0])), terms };
        let s = solve(&p, DVector::zeros(2), Options::default()).unwrap();
        assert!((s.objective + 2f64.sqrt()).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn lp_over_box() {
        // maximize 2x - y on [-1,1]²
        let mut terms = Vec::new();
        for i in 0..2 {
            for sgn in [1.0, -1.0] {
                let mut c = DVector::zeros(2);
                c[i] = sgn;
                terms.push(Term::Linear { coef: c, offset: 1.0 });
            }
        }
        let p = Problem { dim: 2, objective: Objective::Linear(DVector::from_vec(vec![-2.0, 1.0])), terms };
        let s = solve(&p, DVector::zeros(2), Options::default()).unwrap();
        assert!((s.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_infeasible_start() {
        let terms = vec![Term::Linear { coef: DVector::from_vec(vec![1.0]), offset: 0.0 }];
        let p = Problem { dim: 1, objective: Objective::Linear(DVector::from_vec(vec![1.0])), terms };
        assert!(solve(&p, DVector::from_vec(vec![1.0]), Options::default()).is_err());
    }
}
