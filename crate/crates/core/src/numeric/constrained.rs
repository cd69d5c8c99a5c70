//! Nearest points on sets cut out by smooth equations, by projected
//! Gauss–Newton steps.

use nalgebra::{DMatrix, DVector};

/// Tolerance on the residual norm accepted as "on the set".
pub const SET_TOL: f64 = 1e-9;

/// A set `{z ∈ R^n : h(z) = 0}` with `h: R^n → R^m` smooth.
pub trait ConstraintSet {
    fn ambient_dim(&self) -> usize;
    fn constraints(&self) -> usize;
    /// Writes `h(z)` into `res` and its row-major Jacobian into `jac`.
    fn residual(&self, z: &[f64], res: &mut [f64], jac: &mut [f64]);
    /// Writes `Σ_i mult_i ∇²h_i(z)` into the row-major `out`; false when
    /// second derivatives are not available.
    fn weighted_hessian(&self, _z: &[f64], _mult: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Scratch buffers shared by the projection and descent steps.
pub struct Workspace {
    n: usize,
    m: usize,
    res: Vec<f64>,
    jac: Vec<f64>,
}

impl Workspace {
    pub fn new<S: ConstraintSet + ?Sized>(set: &S) -> Self {
        let (n, m) = (set.ambient_dim(), set.constraints());
        Workspace { n, m, res: vec![0.0; m], jac: vec![0.0; m * n] }
    }

    fn refresh<S: ConstraintSet + ?Sized>(&mut self, set: &S, z: &[f64]) -> f64 {
        set.residual(z, &mut self.res, &mut self.jac);
        self.res.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Solves `(J Jᵀ) λ = b` by Gaussian elimination with partial pivoting.
    fn solve_gram(&self, b: &[f64]) -> Option<Vec<f64>> {
        let (n, m) = (self.n, self.m);
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] = (0..n).map(|c| self.jac[i * n + c] * self.jac[j * n + c]).sum();
            }
        }
        let scale = (0..m).map(|i| a[i * m + i]).fold(0.0, f64::max);
        let mut x = b.to_vec();
        for col in 0..m {
            let piv = (col..m).max_by(|p, q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs()))?;
            if a[piv * m + col].abs() <= 1e-14 * scale.max(1e-300) {
                return None;
            }
            if piv != col {
                for c in 0..m {
                    a.swap(piv * m + c, col * m + c);
                }
                x.swap(piv, col);
            }
            for row in col + 1..m {
                let f = a[row * m + col] / a[col * m + col];
                for c in col..m {
                    a[row * m + c] -= f * a[col * m + c];
                }
                x[row] -= f * x[col];
            }
        }
        for col in (0..m).rev() {
            let s: f64 = (col + 1..m).map(|c| a[col * m + c] * x[c]).sum();
            x[col] = (x[col] - s) / a[col * m + col];
        }
        Some(x)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimum-norm Newton steps onto the set. Leaves the Jacobian at the final
/// point in the workspace.
pub fn project<S: ConstraintSet + ?Sized>(set: &S, z: &mut [f64], ws: &mut Workspace) -> bool {
    let (n, m) = (ws.n, ws.m);
    for _ in 0..30 {
        let r = ws.refresh(set, z);
        if !r.is_finite() {
            return false;
        }
        if r <= 1e-13 * (1.0 + norm(z)) {
            return true;
        }
        let rhs = ws.res.clone();
        let Some(lam) = ws.solve_gram(&rhs) else { return false };
        for d in 0..n {
            let step: f64 = (0..m).map(|r| ws.jac[r * n + d] * lam[r]).sum();
            z[d] -= step;
        }
    }
    ws.refresh(set, z) <= SET_TOL
}

/// Moves `z` along the set toward `x`: a step to the tangent projection of
/// `x − z` followed by re-projection, halved until it brings `z` closer.
/// Returns false when `z` could not be put on the set.
pub fn descend<S: ConstraintSet + ?Sized>(set: &S, x: &[f64], z: &mut [f64], ws: &mut Workspace, max_steps: usize) -> bool {
    let (n, m) = (ws.n, ws.m);
    if !project(set, z, ws) {
        return false;
    }
    for _ in 0..max_steps {
        let d: Vec<f64> = x.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
        let before: f64 = d.iter().map(|v| v * v).sum();
        let jd: Vec<f64> = (0..m).map(|r| (0..n).map(|c| ws.jac[r * n + c] * d[c]).sum()).collect();
        let Some(lam) = ws.solve_gram(&jd) else { return true };
        let tangent: Vec<f64> = (0..n).map(|c| d[c] - (0..m).map(|r| ws.jac[r * n + c] * lam[r]).sum::<f64>()).collect();
        let length = norm(&tangent);
        let prev = z.to_vec();
        // halve the tangent step until the re-projected point is closer
        let mut alpha = 1.0;
        let accepted = loop {
            for c in 0..n {
                z[c] = prev[c] + alpha * tangent[c];
            }
            if project(set, z, ws) {
                let after: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                if after <= before {
                    break true;
                }
            }
            alpha *= 0.5;
            if alpha * length <= 1e-12 * (1.0 + before.sqrt()) {
                break false;
            }
        };
        if !accepted {
            z.copy_from_slice(&prev);
            return project(set, z, ws);
        }
        if alpha * length <= 1e-7 * (1.0 + before.sqrt()) {
            break;
        }
    }
    true
}

/// Newton iteration on the optimality system of `min ½|z − x|²` subject to
/// `h(z) = 0`, started from a point already near the minimizer. Keeps the
/// result only if it lands on the set closer to `x`; returns whether it did.
pub fn newton_polish<S: ConstraintSet + ?Sized>(set: &S, x: &[f64], z: &mut [f64], ws: &mut Workspace) -> bool {
    let (n, m) = (ws.n, ws.m);
    if ws.refresh(set, z) > SET_TOL {
        return false;
    }
    let start = z.to_vec();
    let dist2 = |z: &[f64]| x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let d0 = dist2(z);
    let diff: Vec<f64> = x.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
    let jd: Vec<f64> = (0..m).map(|r| (0..n).map(|c| ws.jac[r * n + c] * diff[c]).sum()).collect();
    let Some(mut lam) = ws.solve_gram(&jd) else { return false };
    let mut hess = vec![0.0; n * n];
    let size = n + m;
    for _ in 0..12 {
        if !set.weighted_hessian(z, &lam, &mut hess) {
            return false;
        }
        let mut a = DMatrix::<f64>::zeros(size, size);
        let mut b = DVector::<f64>::zeros(size);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = hess[i * n + j] + if i == j { 1.0 } else { 0.0 };
            }
            let jt: f64 = (0..m).map(|r| ws.jac[r * n + i] * lam[r]).sum();
            b[i] = -(z[i] - x[i] + jt);
        }
        for r in 0..m {
            for c in 0..n {
                a[(n + r, c)] = ws.jac[r * n + c];
                a[(c, n + r)] = ws.jac[r * n + c];
            }
            b[n + r] = -ws.res[r];
        }
        let Some(step) = a.lu().solve(&b) else { break };
        let size_z: f64 = (0..n).map(|i| step[i] * step[i]).sum::<f64>().sqrt();
        for i in 0..n {
            z[i] += step[i];
        }
        for r in 0..m {
            lam[r] += step[n + r];
        }
        let r = ws.refresh(set, z);
        if !r.is_finite() {
            break;
        }
        if size_z <= 1e-13 * (1.0 + d0.sqrt()) && r <= 1e-13 {
            break;
        }
    }
    // a start that is already optimal may only be matched up to rounding
    if project(set, z, ws) && dist2(z) <= d0 + 1e-12 * (1.0 + d0) {
        return true;
    }
    z.copy_from_slice(&start);
    ws.refresh(set, z);
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The unit circle in the plane.
    struct Circle;

    impl ConstraintSet for Circle {
        fn ambient_dim(&self) -> usize {
            2
        }
        fn constraints(&self) -> usize {
            1
        }
        fn residual(&self, z: &[f64], res: &mut [f64], jac: &mut [f64]) {
            res[0] = (z[0] * z[0] + z[1] * z[1] - 1.0) / 2.0;
            jac[0] = z[0];
            jac[1] = z[1];
        }
        fn weighted_hessian(&self, _z: &[f64], mult: &[f64], out: &mut [f64]) -> bool {
            out.copy_from_slice(&[mult[0], 0.0, 0.0, mult[0]]);
            true
        }
    }

    #[test]
    fn projection_lands_on_the_circle() {
        let mut ws = Workspace::new(&Circle);
        let mut z = vec![3.0, 4.0];
        assert!(project(&Circle, &mut z, &mut ws));
        assert!((norm(&z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn descent_finds_the_radial_point() {
        let mut ws = Workspace::new(&Circle);
        let x = [2.0, 1.0];
        let mut z = vec![-0.2, 1.0];
        assert!(descend(&Circle, &x, &mut z, &mut ws, 200));
        let expect = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        // steps stop at 1e-7 relative, and the distance error is second order
        assert!((z[0] - expect[0]).abs() < 1e-6 && (z[1] - expect[1]).abs() < 1e-6, "{z:?}");
        let dist = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2)).sqrt();
        assert!((dist - (5f64.sqrt() - 1.0)).abs() < 1e-12, "{dist}");
        assert!(newton_polish(&Circle, &x, &mut z, &mut ws));
        assert!((z[0] - expect[0]).abs() < 1e-12 && (z[1] - expect[1]).abs() < 1e-12, "{z:?}");
    }

    #[test]
    fn newton_polish_converges_from_nearby() {
        let mut ws = Workspace::new(&Circle);
        let x = [2.0, 1.0];
        let mut z = vec![0.8, 0.6];
        assert!(newton_polish(&Circle, &x, &mut z, &mut ws));
        let expect = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        assert!((z[0] - expect[0]).abs() < 1e-12 && (z[1] - expect[1]).abs() < 1e-12, "{z:?}");
    }
}
