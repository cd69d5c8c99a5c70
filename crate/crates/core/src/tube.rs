//! Model tube volumes: Gaussian mass of Euclidean tubes around coordinate
//! subspaces, geodesic tubes around great subspheres and projective
//! subspaces, and Euclidean tubes around linear subspaces for radial measures.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::Measure;
use crate::numeric::quadrature::integrate;
use crate::numeric::special::{erf, gamma_lr, sphere_area};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    Euclidean(usize),
    Sphere(usize),
    ComplexProjective(usize),
}

/// One model-tube evaluation request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeQuery {
    pub ambient: Ambient,
    pub core_dim: usize,
    pub t: f64,
    #[serde(default)]
    pub gaussian_scales: Option<Vec<f64>>,
}

impl TubeQuery {
    pub fn evaluate(&self) -> Result<f64> {
        match self.ambient {
            Ambient::Euclidean(n) => {
                if self.core_dim >= n {
                    return Err(invalid("core dimension must be below the ambient dimension"));
                }
                let scales = self
                    .gaussian_scales
                    .clone()
                    .unwrap_or_else(|| vec![0.5; n - self.core_dim]);
                if scales.len() != n - self.core_dim {
                    return Err(invalid("need one gaussian scale per normal direction"));
                }
                gaussian_subspace_tube(&scales, self.t)
            }
            Ambient::Sphere(n) => spherical_tube_fraction(n, self.core_dim, self.t),
            Ambient::ComplexProjective(n) => cp_tube_fraction(n, self.core_dim, self.t),
        }
    }
}

/// `count` evenly spaced points covering `[lo, hi]`.
pub fn t_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(invalid("tube radius must be finite and nonnegative"))
    }
}

/// Mass of the centered ball of radius `t` under the probability density
/// proportional to `exp(-Σ a_i y_i²)` on `R^k`.
pub fn gaussian_subspace_tube(scales: &[f64], t: f64) -> Result<f64> {
    check_t(t)?;
    if scales.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(invalid("gaussian scales must be positive"));
    }
    if scales.is_empty() {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let k = scales.len();
    let isotropic = scales.iter().all(|&a| a == scales[0]);
    let v = if isotropic {
        gamma_lr(k as f64 / 2.0, scales[0] * t * t)
    } else if k <= 3 {
        nested_ball_mass(scales, t)
    } else {
        ruben_series(scales, t)?
    };
    Ok(v.clamp(0.0, 1.0))
}

fn nested_ball_mass(scales: &[f64], t: f64) -> f64 {
    match scales.len() {
        0 => 1.0,
        1 => erf(scales[0].sqrt() * t),
        _ => {
            let a = scales[0];
            let norm = (a / PI).sqrt();
            let rest = &scales[1..];
            // y = t sin θ removes the square-root endpoint behaviour.
            let q = integrate(
                |th: f64| {
                    let y = t * th.sin();
                    let c = th.cos();
                    norm * (-a * y * y).exp() * nested_ball_mass(rest, t * c) * t * c
                },
                -FRAC_PI_2,
                FRAC_PI_2,
                1e-13,
                1e-12,
            );
            q.value
        }
    }
}

/// Ruben's chi-square mixture for `P(Σ λ_i χ²_1 ≤ t²)` with `λ_i = 1/(2a_i)`.
fn ruben_series(scales: &[f64], t: f64) -> Result<f64> {
    let k = scales.len() as f64;
    let lambdas: Vec<f64> = scales.iter().map(|a| 0.5 / a).collect();
    let beta = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratios: Vec<f64> = lambdas.iter().map(|l| 1.0 - beta / l).collect();
    let x = t * t / beta;
    let mut c = vec![lambdas.iter().map(|l| (beta / l).sqrt()).product::<f64>()];
    let mut g: Vec<f64> = vec![0.0];
    let mut total = c[0] * gamma_lr(k / 2.0, x / 2.0);
    let mut weight = c[0];
    const MAX_TERMS: usize = 200_000;
    let mut j = 0;
    while 1.0 - weight > 1e-14 {
        j += 1;
        if j > MAX_TERMS {
            return Err(Error::NotConverged { iterations: j, best: format!("{total}") });
        }
        g.push(ratios.iter().map(|r| r.powi(j as i32)).sum());
        let cj = (0..j).map(|r| g[j - r] * c[r]).sum::<f64>() / (2.0 * j as f64);
        c.push(cj);
        weight += cj;
        let f = gamma_lr(k / 2.0 + j as f64, x / 2.0);
        total += cj * f;
        if f < 1e-300 && cj < 1e-300 {
            break;
        }
    }
    Ok(total)
}

/// Fraction of `S^n` within geodesic distance `t` of a great `S^k`.
pub fn spherical_tube_fraction(n: usize, k: usize, t: f64) -> Result<f64> {
    check_t(t)?;
    if n == 0 || k >= n {
        return Err(invalid("need 0 <= k < n for a subsphere"));
    }
    if t >= FRAC_PI_2 {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let m = (n - k - 1) as i32;
    let q = integrate(|th: f64| th.cos().powi(k as i32) * th.sin().powi(m), 0.0, t, 1e-15, 1e-13);
    let v = sphere_area(k) * sphere_area(n - k - 1) * q.value / sphere_area(n);
    Ok(v.clamp(0.0, 1.0))
}

/// Fraction of `CP^n` (Fubini–Study) within distance `t` of a linear `CP^k`.
pub fn cp_tube_fraction(n: usize, k: usize, t: f64) -> Result<f64> {
    if k >= n {
        return Err(invalid("need 0 <= k < n for a projective subspace"));
    }
    spherical_tube_fraction(2 * n + 1, 2 * k + 1, t)
}

/// Index sets of size `k` drawn from `0..n`, in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut pick: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(pick.clone());
        // advance the rightmost index that still has room
        let Some(i) = (0..k).rev().find(|&i| pick[i] < n - k + i) else { return out };
        pick[i] += 1;
        for j in i + 1..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Smallest `tube(a_S, t) − tube(a_min, t)` over all `k`-subsets `S` of the
/// scales, where `a_min` holds the `k` smallest scales. Negative values mean
/// some coordinate subspace has a thinner tube than the widest directions.
pub fn subset_tube_gap(scales: &[f64], k: usize, t: f64) -> Result<f64> {
    if k == 0 || k > scales.len() {
        return Err(invalid("need 1 <= k <= number of scales"));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = gaussian_subspace_tube(&sorted[..k], t)?;
    let mut gap = f64::INFINITY;
    for s in k_subsets(scales.len(), k) {
        let mut sub: Vec<f64> = s.iter().map(|&i| scales[i]).collect();
        sub.sort_by(f64::total_cmp);
        gap = gap.min(gaussian_subspace_tube(&sub, t)? - floor);
    }
    Ok(gap)
}

/// Mass of the Euclidean `t`-tube around a linear subspace of dimension
/// `core_dim` under a rotation-invariant measure.
pub fn radial_subspace_tube(measure: &Measure, core_dim: usize, t: f64) -> Result<f64> {
    check_t(t)?;
    let n = measure.dim();
    if core_dim >= n {
        return Err(invalid("core dimension must be below the ambient dimension"));
    }
    let parts = measure
        .radial_parts()
        .ok_or_else(|| Error::Unsupported("radial tube needs a rotation-invariant measure".into()))?;
    // Fraction of the sphere of radius r that lies in the tube.
    let shell = |r: f64| -> f64 {
        if r <= t {
            1.0
        } else if core_dim == 0 {
            0.0
        } else {
            spherical_tube_fraction(n - 1, core_dim - 1, (t / r).asin()).unwrap_or(0.0)
        }
    };
    let mut total = parts.origin_atom;
    if let Some((r, mass)) = parts.shell {
        total += mass * shell(r);
    }
    if let Some((mass, table)) = parts.continuous {
        let rmax = table.rmax();
        let inner = table.cdf(t.min(rmax));
        let outer = if t < rmax && core_dim > 0 {
            integrate(|r| table.pdf(r) * shell(r), t, rmax, 1e-12, 1e-10).value
        } else {
            0.0
        };
        total += mass * (inner + outer);
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureSpec;
    use proptest::prelude::*;
    use statrs::function::beta::beta_reg;

    fn sphere_oracle(n: usize, k: usize, t: f64) -> f64 {
        // Tube fraction as an incomplete beta in sin² t.
        if t >= FRAC_PI_2 {
            return 1.0;
        }
        beta_reg((n - k) as f64 / 2.0, (k + 1) as f64 / 2.0, t.sin().powi(2))
    }

    #[test]
    fn one_dimensional_is_erf() {
        let v = gaussian_subspace_tube(&[1.0], 1.0).unwrap();
        let oracle = integrate(|y| (-y * y).exp() / PI.sqrt(), -1.0, 1.0, 1e-14, 0.0).value;
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.842_700_792_949_714_9).abs() < 1e-12);
    }

    #[test]
    fn planar_isotropic_closed_form() {
        for t in t_grid(0.0, 3.0, 64) {
            let v = gaussian_subspace_tube(&[1.0, 1.0], t).unwrap();
            assert!((v - (1.0 - (-t * t).exp())).abs() < 1e-12);
        }
        assert_eq!(gaussian_subspace_tube(&[], 0.7).unwrap(), 1.0);
        assert_eq!(gaussian_subspace_tube(&[2.0, 3.0], 0.0).unwrap(), 0.0);
        assert!(gaussian_subspace_tube(&[0.0], 1.0).is_err());
    }

    #[test]
    fn anisotropic_nested_matches_isotropic_limit() {
        // nudging one scale must move the value continuously
        let iso = gaussian_subspace_tube(&[1.0, 1.0, 1.0], 1.2).unwrap();
        let near = gaussian_subspace_tube(&[1.0, 1.0, 1.0 + 1e-9], 1.2).unwrap();
        assert!((iso - near).abs() < 1e-8);
    }

    #[test]
    fn ruben_matches_nested_integral() {
        let scales = [0.3, 0.7, 1.1, 2.0];
        for &t in &[0.2, 0.8, 1.5, 3.0] {
            let ruben = gaussian_subspace_tube(&scales, t).unwrap();
            // Independent: peel off one coordinate by quadrature.
            let a = scales[0];
            let oracle = integrate(
                |y| (a / PI).sqrt() * (-a * y * y).exp() * nested_ball_mass(&scales[1..], (t * t - y * y).max(0.0).sqrt()),
                -t,
                t,
                1e-13,
                0.0,
            )
            .value;
            assert!((ruben - oracle).abs() < 1e-8, "t={t}: {ruben} vs {oracle}");
        }
    }

    #[test]
    fn sphere_examples() {
        assert!((spherical_tube_fraction(2, 1, PI / 6.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((spherical_tube_fraction(3, 1, PI / 4.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(spherical_tube_fraction(4, 2, FRAC_PI_2).unwrap(), 1.0);
        for t in t_grid(0.0, 1.5, 16) {
            assert!((spherical_tube_fraction(2, 0, t).unwrap() - (1.0 - t.cos())).abs() < 1e-10);
        }
        assert!(spherical_tube_fraction(2, 2, 0.1).is_err());
    }

    #[test]
    fn sphere_matches_incomplete_beta() {
        for n in 1..7 {
            for k in 0..n {
                for t in t_grid(0.0, 1.6, 9) {
                    let v = spherical_tube_fraction(n, k, t).unwrap();
                    assert!((v - sphere_oracle(n, k, t)).abs() < 1e-10, "n={n} k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn projective_line() {
        assert!((cp_tube_fraction(2, 1, PI / 4.0).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(cp_tube_fraction(2, 1, 0.0).unwrap(), 0.0);
        for t in t_grid(0.0, FRAC_PI_2, 64) {
            let v = cp_tube_fraction(2, 1, t).unwrap();
            assert_eq!(v, spherical_tube_fraction(5, 3, t).unwrap());
            assert!((v - (1.0 - t.cos().powi(4))).abs() < 1e-10);
        }
    }

    #[test]
    fn radial_examples() {
        let m = Measure::new(MeasureSpec::atom_sphere(2, 0.5, 1.0)).unwrap();
        let v = radial_subspace_tube(&m, 1, 0.5).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(radial_subspace_tube(&m, 1, 0.0).unwrap(), 0.5);
        let s = Measure::new(MeasureSpec::uniform_sphere(2, 1.0)).unwrap();
        assert_eq!(radial_subspace_tube(&s, 1, 1.0).unwrap(), 1.0);
        let g = Measure::new(MeasureSpec::gaussian(vec![1.0, 2.0])).unwrap();
        assert!(radial_subspace_tube(&g, 1, 0.5).is_err());
    }

    #[test]
    fn radial_gaussian_matches_coordinate_tube() {
        let m = Measure::new(MeasureSpec::gaussian(vec![0.5; 3])).unwrap();
        for &t in &[0.1, 0.5, 1.0, 2.0] {
            let v = radial_subspace_tube(&m, 2, t).unwrap();
            let w = gaussian_subspace_tube(&[0.5], t).unwrap();
            assert!((v - w).abs() < 1e-7, "t={t}: {v} {w}");
            let v = radial_subspace_tube(&m, 1, t).unwrap();
            let w = gaussian_subspace_tube(&[0.5, 0.5], t).unwrap();
            assert!((v - w).abs() < 1e-7, "t={t}: {v} {w}");
        }
    }

    #[test]
    fn uniform_ball_slab() {
        // Slab |x_1| ≤ t in the unit 3-ball: mass (3t - t³)/2.
        let m = Measure::new(MeasureSpec::uniform_ball(3, 1.0)).unwrap();
        for &t in &[0.1, 0.4, 0.9] {
            let v = radial_subspace_tube(&m, 2, t).unwrap();
            assert!((v - (3.0 * t - t * t * t) / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn subsets_are_counted_and_ordered() {
        let s = k_subsets(5, 3);
        assert_eq!(s.len(), 10);
        assert_eq!(s[0], vec![0, 1, 2]);
        assert_eq!(s[9], vec![2, 3, 4]);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(k_subsets(3, 0), vec![Vec::<usize>::new()]);
        assert!(k_subsets(2, 3).is_empty());
    }

    #[test]
    fn subset_gap_vanishes_for_equal_scales() {
        assert_eq!(subset_tube_gap(&[0.7; 4], 2, 0.9).unwrap(), 0.0);
        // dropping the widest direction thickens the tube
        let gap = subset_tube_gap(&[0.2, 1.0, 3.0], 2, 0.5).unwrap();
        assert_eq!(gap, 0.0);
        let strict = gaussian_subspace_tube(&[1.0, 3.0], 0.5).unwrap() - gaussian_subspace_tube(&[0.2, 1.0], 0.5).unwrap();
        assert!(strict > 0.1);
        assert!(subset_tube_gap(&[1.0], 2, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn tubes_are_monotone(t in 0.0f64..3.0, dt in 0.0f64..0.5, a in 0.1f64..3.0, b in 0.1f64..3.0) {
            let lo = gaussian_subspace_tube(&[a, b], t).unwrap();
            let hi = gaussian_subspace_tube(&[a, b], t + dt).unwrap();
            prop_assert!(hi >= lo - 1e-12);
            let lo = spherical_tube_fraction(4, 1, t).unwrap();
            let hi = spherical_tube_fraction(4, 1, t + dt).unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }

        #[test]
        fn scale_monotone(t in 0.05f64..3.0, a in 0.1f64..3.0, b in 0.1f64..3.0, da in 0.0f64..1.0) {
            let lo = gaussian_subspace_tube(&[a, b], t).unwrap();
            let hi = gaussian_subspace_tube(&[a + da, b], t).unwrap();
            prop_assert!(hi >= lo - 1e-10);
        }
    }
}
