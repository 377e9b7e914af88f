//! Closed-form bound calculators: Marchenko–Pastur quadrature for `χ_c`, the
//! restricted-norm constant `g_{k,λ}`, singular-value-gap and
//! second-eigenvalue bounds, and bisection for their thresholds.

use serde::Serialize;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Marchenko–Pastur density at `x` for ratio `c ≥ 1` (the atom at zero
/// vanishes there): `√((b−x)(x−a)) / (2πx)` on `[a, b]` with
/// `a = (√c − 1)²`, `b = (√c + 1)²`, zero outside.
pub fn mp_density(c: f64, x: f64) -> f64 {
    assert!(c >= 1.0, "mp_density requires c >= 1");
    let (a, b) = mp_support(c);
    if x <= a || x >= b {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * PI * x)
}

pub fn mp_support(c: f64) -> (f64, f64) {
    let s = c.sqrt();
    ((s - 1.0).powi(2), (s + 1.0).powi(2))
}

/// `∫ x^m dMP_c` by the same quadrature path as [`chi_limit`]; `m = 0` is the
/// total mass (1) and `m = 1` the mean (c). Used as the oracle side of the
/// density tests.
pub fn mp_moment(c: f64, m: i32) -> Result<f64> {
    let (a, b) = mp_support(c);
    // x = a + (b−a) sin²θ removes the square-root endpoint singularities;
    // at c = 1 the inverse-√x singularity at 0 cancels the same way.
    adaptive_gauss_legendre(|theta| {
        let s = theta.sin();
        let co = theta.cos();
        let x = a + (b - a) * s * s;
        let jacobian = 2.0 * (b - a) * s * co;
        let sqrt_term = (b - a) * s * co;
        sqrt_term / (2.0 * PI * x) * x.powi(m) * jacobian
    })
}

/// The limiting twirl constant
/// `χ_c = c⁻¹ [∫_a^b √((x−a)(b−x)) / (2π√x) dx]²`, increasing in `c` with
/// `χ_1 = (8/(3π))²` and `χ_c → 1`.
pub fn chi_limit(c: f64) -> Result<f64> {
    if !(c >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "chi_limit requires c >= 1, got {c}"
        )));
    }
    let (a, b) = mp_support(c);
    let integral = adaptive_gauss_legendre(|theta| {
        let s = theta.sin();
        let co = theta.cos();
        let x = a + (b - a) * s * s;
        let jacobian = 2.0 * (b - a) * s * co;
        let sqrt_term = (b - a) * s * co;
        sqrt_term / (2.0 * PI * x.sqrt()) * jacobian
    })?;
    Ok(integral * integral / c)
}

/// Finite-size floor `χ_{M,N} ≥ 1/(N+1)`.
pub fn chi_finite_floor(n: usize) -> f64 {
    1.0 / (n as f64 + 1.0)
}

/// `g_{k,λ} = 2(1+√λ)² / (χ_{k/λ} √k)`, the asymptotic restricted-norm
/// bound. `k` is treated as a continuous parameter so thresholds can be
/// located between integers.
pub fn g_bound(k: f64, lambda: f64) -> Result<f64> {
    check_k_lambda(k, lambda)?;
    let chi = chi_limit(k / lambda)?;
    Ok(2.0 * (1.0 + lambda.sqrt()).powi(2) / (chi * k.sqrt()))
}

/// `√(λ + 1/k − λ/k²)`, the limiting top singular value.
pub fn limit_top_singular(k: f64, lambda: f64) -> f64 {
    (lambda + 1.0 / k - lambda / (k * k)).sqrt()
}

/// Asymptotic lower bound on the singular value gap `s1 − s2`.
pub fn sv_gap_lower(k: f64, lambda: f64) -> Result<f64> {
    Ok(limit_top_singular(k, lambda) - g_bound(k, lambda)?)
}

/// Asymptotic upper bound on the singular value gap.
pub fn sv_gap_upper(k: f64, lambda: f64) -> Result<f64> {
    Ok(limit_top_singular(k, lambda) + g_bound(k, lambda)?)
}

/// The explicit (χ₁-based) lower bound
/// `√(λ + 1/k − λ/k²) − 9π²(1+√λ)²/(32√k)`; always at most
/// [`sv_gap_lower`] since `χ` is increasing.
pub fn explicit_sv_gap_lower(k: f64, lambda: f64) -> Result<f64> {
    check_k_lambda(k, lambda)?;
    Ok(limit_top_singular(k, lambda)
        - 9.0 * PI * PI * (1.0 + lambda.sqrt()).powi(2) / (32.0 * k.sqrt()))
}

/// Upper bound on the second-largest eigenvalue modulus at `λ = 1`:
/// `(√(1 + (k−1)/k²) + g_{k,1}) · g_{k,1}`.
pub fn ev2_upper(k: f64) -> Result<f64> {
    let g = g_bound(k, 1.0)?;
    Ok(((1.0 + (k - 1.0) / (k * k)).sqrt() + g) * g)
}

/// All bound quantities at one `(k, λ)` point. `ev2_ub` is only defined for
/// `λ = 1` (square super-operators).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundSet {
    pub k: f64,
    pub lambda: f64,
    pub chi: f64,
    pub g: f64,
    pub sv_gap_lb: f64,
    pub sv_gap_ub: f64,
    pub ev2_ub: Option<f64>,
    pub explicit_lb: f64,
}

impl BoundSet {
    pub fn compute(k: f64, lambda: f64) -> Result<Self> {
        check_k_lambda(k, lambda)?;
        let chi = chi_limit(k / lambda)?;
        let g = 2.0 * (1.0 + lambda.sqrt()).powi(2) / (chi * k.sqrt());
        let top = limit_top_singular(k, lambda);
        let ev2_ub = if (lambda - 1.0).abs() < 1e-12 {
            Some(((1.0 + (k - 1.0) / (k * k)).sqrt() + g) * g)
        } else {
            None
        };
        Ok(Self {
            k,
            lambda,
            chi,
            g,
            sv_gap_lb: top - g,
            sv_gap_ub: top + g,
            ev2_ub,
            explicit_lb: explicit_sv_gap_lower(k, lambda)?,
        })
    }
}

/// Bisection root of `bound(k) = target` over a bracket in `k`, to
/// `|Δk| < 10⁻³`. The bound must change sign across the bracket.
pub fn threshold<F>(bound: F, target: f64, bracket: (f64, f64)) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = bracket;
    let f_lo = bound(lo)? - target;
    let f_hi = bound(hi)? - target;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange(lo, hi));
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        let f_mid = bound(mid)? - target;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_k_lambda(k: f64, lambda: f64) -> Result<()> {
    if !(k >= 1.0) {
        return Err(Error::InvalidParameter(format!("k = {k} must be >= 1")));
    }
    if !(lambda > 0.0 && lambda < k) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} outside (0, k = {k})"
        )));
    }
    Ok(())
}

/// Integrates a smooth function over `[0, π/2]` by Gauss–Legendre, doubling
/// the order until successive values differ by less than 10⁻¹⁰.
fn adaptive_gauss_legendre<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let mut prev = f64::NAN;
    let mut order = 16;
    while order <= 2048 {
        let value = gauss_legendre(&f, 0.0, PI / 2.0, order);
        if (value - prev).abs() < 1e-10 {
            return Ok(value);
        }
        prev = value;
        order *= 2;
    }
    Err(Error::QuadratureNotConverged((prev - prev).abs()))
}

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
    let (nodes, weights) = legendre_nodes(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on the
/// Legendre recurrence.
fn legendre_nodes(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mp_density_support_and_mass() {
        for c in [1.0, 2.0, 4.0] {
            let (a, b) = mp_support(c);
            assert_eq!(mp_density(c, a - 0.1), 0.0);
            assert_eq!(mp_density(c, b + 0.1), 0.0);
            assert!((mp_moment(c, 0).unwrap() - 1.0).abs() < 1e-8, "mass at c={c}");
            assert!((mp_moment(c, 1).unwrap() - c).abs() < 1e-8, "mean at c={c}");
        }
    }

    #[test]
    fn chi_reference_values() {
        let chi1 = chi_limit(1.0).unwrap();
        let expected = (8.0 / (3.0 * PI)).powi(2);
        assert!((chi1 - expected).abs() < 1e-9, "chi_1 = {chi1}");
        assert!((chi_limit(1e4).unwrap() - 1.0).abs() < 1e-3);
        assert!(chi_limit(2.0).unwrap() > chi1);
        assert!(chi_limit(0.5).is_err());
    }

    #[test]
    fn chi_monotone_in_unit_interval() {
        let grid = [1.0, 1.5, 2.0, 4.0, 10.0, 100.0];
        let values: Vec<f64> = grid.iter().map(|&c| chi_limit(c).unwrap()).collect();
        for w in values.windows(2) {
            assert!(w[0] < w[1]);
        }
        for v in values {
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn chi_floor_examples() {
        assert!((chi_finite_floor(1) - 0.5).abs() < 1e-15);
        assert!((chi_finite_floor(3) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn g_bound_regimes() {
        assert!(g_bound(169.0, 1.0).unwrap() < 1.0);
        // g ~ 2(1+√λ)²/√k for large k
        let ratio = g_bound(1e6, 1.0).unwrap() / (8.0 / 1e3);
        assert!((ratio - 1.0).abs() < 1e-3, "ratio = {ratio}");
        // χ₁-based explicit coefficient: g ≤ 9π²(1+1)²/(32√k)
        let g64 = g_bound(64.0, 1.0).unwrap();
        assert!(g64 <= 9.0 * PI * PI * 4.0 / (32.0 * 8.0) + 1e-12);
    }

    #[test]
    fn sv_gap_signs() {
        assert!(sv_gap_lower(60.0, 1.0).unwrap() < 0.0);
        assert!(sv_gap_lower(169.0, 1.0).unwrap() > 0.0);
        for k in [50.0, 100.0, 200.0] {
            assert!(sv_gap_lower(k, 1.0).unwrap() <= sv_gap_upper(k, 1.0).unwrap());
        }
    }

    #[test]
    fn explicit_bound_below_chi_bound() {
        for &k in &[64.0, 100.0, 169.0, 400.0] {
            for &lambda in &[0.5, 1.0, 2.0] {
                let e = explicit_sv_gap_lower(k, lambda).unwrap();
                let l = sv_gap_lower(k, lambda).unwrap();
                assert!(e <= l + 1e-12, "k={k} λ={lambda}");
            }
        }
        // explicit limit at λ=1: approaches 1 from below as k → ∞
        assert!((explicit_sv_gap_lower(1e9, 1.0).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ev2_crosses_one_near_threshold() {
        assert!(ev2_upper(169.0).unwrap() < 1.0);
        assert!(ev2_upper(160.0).unwrap() > 1.0);
        // large-k trend: 1 − ev2_upper vs 1 − 8/√k within 10%
        let k = 1e4;
        let gap = 1.0 - ev2_upper(k).unwrap();
        let trend = 1.0 - 8.0 / k.sqrt();
        assert!((gap - trend).abs() / trend < 0.1);
    }

    #[test]
    fn thresholds_match_figure_captions() {
        let k_sv = threshold(|k| sv_gap_lower(k, 1.0), 0.0, (50.0, 80.0)).unwrap();
        assert!((k_sv - 63.52).abs() < 0.05, "k* = {k_sv}");
        let k_ev = threshold(|k| ev2_upper(k), 1.0, (150.0, 200.0)).unwrap();
        assert!((k_ev - 168.5).abs() < 0.2, "k* = {k_ev}");
        assert!(matches!(
            threshold(|k| ev2_upper(k), 1.0, (300.0, 400.0)),
            Err(Error::NoSignChange(..))
        ));
    }

    #[test]
    fn sv_gap_lower_monotone_on_grid() {
        let mut prev = f64::NEG_INFINITY;
        let mut k = 50.0;
        while k <= 500.0 {
            let v = sv_gap_lower(k, 1.0).unwrap();
            assert!(v > prev);
            prev = v;
            k += 10.0;
        }
    }

    #[test]
    fn bound_set_invariants() {
        let bs = BoundSet::compute(169.0, 1.0).unwrap();
        assert!(bs.chi > 0.0 && bs.chi <= 1.0);
        assert!(bs.g > 0.0);
        assert!(bs.sv_gap_lb <= bs.sv_gap_ub);
        assert!(bs.explicit_lb <= bs.sv_gap_lb + 1e-12);
        assert!(bs.ev2_ub.is_some());
        assert!(BoundSet::compute(169.0, 0.5).unwrap().ev2_ub.is_none());
    }
}
