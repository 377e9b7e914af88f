//! Exact finite-size and limiting moments of the overlap `f = ‖F Ω_d‖²`.
//!
//! The exact route evaluates the full `S_{2p} × S_{2p}` Weingarten sum in
//! rational arithmetic; the limiting route evaluates either the geodesic
//! subset enumeration or the closed form `(λ + 1/k − λ/k²)^p`. The three
//! agree where their domains overlap, which is what the tests lean on.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::perm_weingarten::{all_permutations, Permutation, WeingartenTable};
use crate::{Error, Result};

/// Default cap on the moment order for the exact `S_{2p}` double sum
/// (`(2p)!²` terms: 576 at `p = 2`). `p = 3` (≈5·10⁵ terms) is opt-in via
/// [`exact_moment_f_uncapped`].
pub const DEFAULT_MOMENT_CAP: usize = 2;

/// Parameters of one exact moment computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MomentSpec {
    pub p: usize,
    pub n: usize,
    pub d: usize,
    pub k: usize,
}

impl MomentSpec {
    pub fn new(p: usize, n: usize, d: usize, k: usize) -> Result<Self> {
        if p < 1 || n < 1 || d < 1 || k < 1 {
            return Err(Error::InvalidParameter(
                "moment spec requires p, n, d, k >= 1".into(),
            ));
        }
        if d > n * k {
            return Err(Error::InvalidParameter(format!(
                "d = {d} exceeds nk = {} (no isometry exists)",
                n * k
            )));
        }
        Ok(Self { p, n, d, k })
    }

    /// Builds a spec from a ratio parameter, rounding `d = round(λn)`. The
    /// realized ratio `d/n` is reported by [`Self::lambda_realized`].
    pub fn from_lambda(p: usize, n: usize, k: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < k as f64) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} outside (0, k = {k})"
            )));
        }
        let d = (lambda * n as f64).round() as usize;
        Self::new(p, n, d.max(1), k)
    }

    pub fn lambda_realized(&self) -> f64 {
        self.d as f64 / self.n as f64
    }
}

/// The fixed pairing permutation `δ ∈ S_{2p}`: boxes are ordered
/// `(1ᵀ, 1ᴮ, 2ᵀ, 2ᴮ, …)` and `δ` is the product of the adjacent
/// transpositions `(1ᵀ 1ᴮ)(2ᵀ 2ᴮ)⋯`, swapping the top and bottom row of
/// each copy of the overlap diagram.
pub fn delta_permutation(p: usize) -> Permutation {
    let cycles: Vec<Vec<usize>> = (0..p).map(|i| vec![2 * i + 1, 2 * i + 2]).collect();
    Permutation::from_cycles(2 * p, &cycles).expect("disjoint adjacent transpositions")
}

/// Exact `E f^p` at finite `(n, d, k)` via the Weingarten double sum, with
/// the default order cap.
pub fn exact_moment_f(spec: &MomentSpec) -> Result<BigRational> {
    exact_moment_with_cap(spec, DEFAULT_MOMENT_CAP)
}

/// Exact `E f^p` with a caller-raised cap (`p = 3` costs ≈5·10⁵ rational
/// terms and a Weingarten table on `S_6`).
pub fn exact_moment_f_uncapped(spec: &MomentSpec) -> Result<BigRational> {
    exact_moment_with_cap(spec, 3)
}

fn exact_moment_with_cap(spec: &MomentSpec, cap: usize) -> Result<BigRational> {
    let &MomentSpec { p, n, d, k } = spec;
    if p > cap {
        return Err(Error::OrderTooLarge { order: p, cap });
    }
    let nk = n * k;
    if nk < 2 * p {
        return Err(Error::GramSingular {
            order: 2 * p,
            dimension: nk,
        });
    }

    let wg = WeingartenTable::compute_with_cap(2 * p, nk, 2 * cap)?;
    let perms = all_permutations(2 * p);
    let delta_inv = delta_permutation(p).inverse();

    let n_big = BigInt::from(n);
    let k_big = BigInt::from(k);
    let d_big = BigInt::from(d);

    // per-α weight n^{#α} k^{#(δ⁻¹α)}, per-β weight d^{#(δ⁻¹β)}
    let alpha_weights: Vec<BigInt> = perms
        .iter()
        .map(|a| {
            n_big.pow(a.cycle_count() as u32)
                * k_big.pow(delta_inv.compose(a).cycle_count() as u32)
        })
        .collect();
    let beta_weights: Vec<BigInt> = perms
        .iter()
        .map(|b| d_big.pow(delta_inv.compose(b).cycle_count() as u32))
        .collect();

    let mut total = BigRational::zero();
    for (ai, alpha) in perms.iter().enumerate() {
        let alpha_inv = alpha.inverse();
        let mut inner = BigRational::zero();
        for (bi, beta) in perms.iter().enumerate() {
            let wg_val = wg.value(&alpha_inv.compose(beta));
            inner += wg_val * BigRational::from(beta_weights[bi].clone());
        }
        total += inner * BigRational::from(alpha_weights[ai].clone());
    }
    Ok(total / BigRational::from(d_big.pow(p as u32)))
}

/// The limiting moment `(λ + 1/k − λ/k²)^p`.
pub fn limit_moment(p: usize, k: usize, lambda: f64) -> Result<f64> {
    check_lambda(k, lambda)?;
    let k = k as f64;
    Ok((lambda + 1.0 / k - lambda / (k * k)).powi(p as i32))
}

/// The limiting moment by direct enumeration of the geodesic subsets
/// `∅ ⊆ A ⊆ B ⊆ [p]`: `k^{−p} Σ (kλ)^{|A|} (−λ/k)^{|B∖A|}`.
pub fn geodesic_moment(p: usize, k: usize, lambda: f64) -> Result<f64> {
    check_lambda(k, lambda)?;
    if p > 20 {
        return Err(Error::OrderTooLarge { order: p, cap: 20 });
    }
    let kf = k as f64;
    let x = kf * lambda;
    let y = -lambda / kf;
    Ok(subset_pair_sum(p, x, y) * kf.powi(-(p as i32)))
}

/// `Σ_{A ⊆ B ⊆ [p]} x^{|A|} y^{|B∖A|}` by explicit bitmask enumeration.
fn subset_pair_sum(p: usize, x: f64, y: f64) -> f64 {
    let full: u64 = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
    let mut total = 0.0;
    let mut b: u64 = 0;
    loop {
        // enumerate submasks a of b
        let mut a = b;
        loop {
            total += x.powi(a.count_ones() as i32) * y.powi((b ^ a).count_ones() as i32);
            if a == 0 {
                break;
            }
            a = (a - 1) & b;
        }
        if b == full {
            break;
        }
        b += 1;
    }
    total
}

/// Checks `Σ_{A⊆B⊆[p]} x^{|A|} y^{|B∖A|} = (1+x+y)^p` within 10⁻¹² relative.
pub fn multinomial_identity_check(p: usize, x: f64, y: f64) -> bool {
    if p > 20 {
        return false;
    }
    let lhs = subset_pair_sum(p, x, y);
    let rhs = (1.0 + x + y).powi(p as i32);
    // relative to the sum of absolute terms, so cancellation-heavy inputs
    // are judged at their actual conditioning
    let scale = (1.0 + x.abs() + y.abs()).powi(p as i32).max(1.0);
    (lhs - rhs).abs() <= 1e-12 * scale
}

fn check_lambda(k: usize, lambda: f64) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if !(lambda > 0.0 && lambda < k as f64) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} outside (0, k = {k})"
        )));
    }
    Ok(())
}
