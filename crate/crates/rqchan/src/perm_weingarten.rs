//! Symmetric-group combinatorics and the unitary Weingarten function.
//!
//! The Weingarten function `Wg(n, σ)` is the convolution inverse of
//! `σ ↦ n^{#σ}` on `S_p`. We compute it exactly in rational arithmetic by
//! solving the class-function linear system, and asymptotically through the
//! Möbius function on cycles.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

use crate::Error;

/// Default cap on the order `p` of exact Weingarten tables. Moment
/// computations of order `p` need tables of order `2p`, so the default covers
/// second moments; callers may raise it explicitly.
pub const DEFAULT_ORDER_CAP: usize = 4;

/// Hard limit on full `S_p` enumeration (`8! = 40320` elements).
const ENUMERATION_LIMIT: usize = 8;

/// A permutation of `{1, …, p}`. The public API is 1-indexed to match the
/// usual `[p]` notation; storage is 0-indexed internally.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    // images[i] = image of i, both 0-indexed
    images: Vec<usize>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.one_indexed_images())
    }
}

impl Permutation {
    /// Builds a permutation from 1-indexed images: `images[i-1]` is the image
    /// of `i`. Rejects non-bijections.
    pub fn from_images(images: &[usize]) -> Result<Self, Error> {
        let p = images.len();
        let mut seen = vec![false; p];
        for &x in images {
            if x < 1 || x > p || seen[x - 1] {
                return Err(Error::InvalidPermutation(format!(
                    "images {images:?} are not a bijection on [{p}]"
                )));
            }
            seen[x - 1] = true;
        }
        Ok(Self {
            images: images.iter().map(|&x| x - 1).collect(),
        })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            images: (0..p).collect(),
        }
    }

    /// The transposition `(a b)` in `S_p`, 1-indexed.
    pub fn transposition(p: usize, a: usize, b: usize) -> Self {
        assert!(a != b && 1 <= a && a <= p && 1 <= b && b <= p);
        let mut images: Vec<usize> = (0..p).collect();
        images.swap(a - 1, b - 1);
        Self { images }
    }

    /// Builds a permutation from disjoint cycles, 1-indexed. Points not
    /// mentioned are fixed.
    pub fn from_cycles(p: usize, cycles: &[Vec<usize>]) -> Result<Self, Error> {
        let mut images: Vec<usize> = (0..p).collect();
        let mut touched = vec![false; p];
        for cycle in cycles {
            for (pos, &x) in cycle.iter().enumerate() {
                if x < 1 || x > p || touched[x - 1] {
                    return Err(Error::InvalidPermutation(format!(
                        "cycles {cycles:?} are not disjoint cycles on [{p}]"
                    )));
                }
                touched[x - 1] = true;
                let next = cycle[(pos + 1) % cycle.len()];
                images[x - 1] = next - 1;
            }
        }
        Ok(Self { images })
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    /// Image of the 1-indexed point `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.images[i - 1] + 1
    }

    pub fn one_indexed_images(&self) -> Vec<usize> {
        self.images.iter().map(|&x| x + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.images.len()];
        for (i, &x) in self.images.iter().enumerate() {
            images[x] = i;
        }
        Self { images }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.degree(), other.degree());
        Self {
            images: other.images.iter().map(|&x| self.images[x]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// Number of cycles `#σ`, counting fixed points.
    pub fn cycle_count(&self) -> usize {
        self.cycle_lengths().len()
    }

    /// Length `|σ| = p − #σ`, the minimum number of transpositions whose
    /// product is `σ`.
    pub fn length(&self) -> usize {
        self.degree() - self.cycle_count()
    }

    fn cycle_lengths(&self) -> Vec<usize> {
        let p = self.degree();
        let mut seen = vec![false; p];
        let mut lengths = Vec::new();
        for start in 0..p {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                len += 1;
                j = self.images[j];
            }
            lengths.push(len);
        }
        lengths
    }

    pub fn cycle_type(&self) -> CycleType {
        let mut parts = self.cycle_lengths();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        CycleType { parts }
    }
}

/// Non-increasing integer partition of `p` recording the cycle lengths of a
/// permutation; the conjugacy-class label in `S_p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CycleType {
    parts: Vec<usize>,
}

impl CycleType {
    pub fn new(mut parts: Vec<usize>) -> Self {
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self { parts }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn degree(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn cycle_count(&self) -> usize {
        self.parts.len()
    }

    pub fn length(&self) -> usize {
        self.degree() - self.cycle_count()
    }

}

/// Catalan number `Cat_m = binom(2m, m) / (m + 1)`.
pub fn catalan(m: usize) -> BigInt {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..m {
        num *= BigInt::from(2 * m - i);
        den *= BigInt::from(i + 1);
    }
    num / den / BigInt::from(m + 1)
}

/// Möbius function of the symmetric group lattice: multiplicative over
/// cycles, with value `(−1)^{ℓ−1} Cat_{ℓ−1}` on an `ℓ`-cycle.
pub fn moebius(sigma: &Permutation) -> BigInt {
    moebius_of_type(&sigma.cycle_type())
}

pub fn moebius_of_type(class: &CycleType) -> BigInt {
    let mut result = BigInt::one();
    for &len in class.parts() {
        let cat = catalan(len - 1);
        if (len - 1) % 2 == 0 {
            result *= cat;
        } else {
            result *= -cat;
        }
    }
    result
}

/// Leading-order Weingarten value `n^{−p−|σ|} · Möb(σ)`.
pub fn weingarten_asymptotic(n: usize, sigma: &Permutation) -> f64 {
    let p = sigma.degree();
    let moeb = moebius(sigma);
    let moeb_f64 = moeb
        .to_string()
        .parse::<f64>()
        .expect("Möbius value fits in f64");
    moeb_f64 * (n as f64).powi(-((p + sigma.length()) as i32))
}

/// All elements of `S_p`, by Heap's algorithm.
pub fn all_permutations(p: usize) -> Vec<Permutation> {
    assert!(
        p <= ENUMERATION_LIMIT,
        "full S_p enumeration limited to p <= {ENUMERATION_LIMIT}"
    );
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..p).collect();
    let mut c = vec![0usize; p];
    out.push(Permutation { images: a.clone() });
    let mut i = 0;
    while i < p {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(Permutation { images: a.clone() });
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Exact table of `Wg(n, ·)` on `S_p`, keyed by cycle type.
///
/// Built by solving the class-function linear system
/// `Σ_τ Wg(n, σ⁻¹τ) n^{#τ} = [σ = id]` in rational arithmetic: one equation
/// per conjugacy class, unknowns indexed by cycle type. This avoids the
/// catastrophic cancellation that floating-point inversion of the full
/// `|S_p| × |S_p|` Gram matrix exhibits for large `n`.
#[derive(Clone, Debug)]
pub struct WeingartenTable {
    order: usize,
    dimension: usize,
    entries: BTreeMap<CycleType, BigRational>,
}

impl WeingartenTable {
    /// Computes the table for `S_p` at dimension `n`, with the default order
    /// cap.
    pub fn compute(p: usize, n: usize) -> Result<Self, Error> {
        Self::compute_with_cap(p, n, DEFAULT_ORDER_CAP)
    }

    /// Computes the table with a caller-supplied order cap (still bounded by
    /// the `S_p` enumeration limit).
    pub fn compute_with_cap(p: usize, n: usize, cap: usize) -> Result<Self, Error> {
        if p == 0 || p > cap || p > ENUMERATION_LIMIT {
            return Err(Error::OrderTooLarge { order: p, cap: cap.min(ENUMERATION_LIMIT) });
        }
        if n < p {
            return Err(Error::GramSingular { order: p, dimension: n });
        }

        let perms = all_permutations(p);
        // Conjugacy classes, one representative each.
        let mut class_index: BTreeMap<CycleType, usize> = BTreeMap::new();
        let mut reps: Vec<Permutation> = Vec::new();
        for sigma in &perms {
            let ct = sigma.cycle_type();
            if !class_index.contains_key(&ct) {
                class_index.insert(ct, reps.len());
                reps.push(sigma.clone());
            }
        }
        let m = reps.len();

        // System: for each representative σ,
        //   Σ_t [ Σ_{τ : type(σ⁻¹τ) = t} n^{#τ} ] Wg(t) = [σ = id].
        let n_big = BigInt::from(n);
        let mut matrix = vec![vec![BigRational::zero(); m]; m];
        let mut rhs = vec![BigRational::zero(); m];
        for (row, sigma) in reps.iter().enumerate() {
            let sigma_inv = sigma.inverse();
            for tau in &perms {
                let t = sigma_inv.compose(tau).cycle_type();
                let col = class_index[&t];
                let coeff = BigRational::from(n_big.pow(tau.cycle_count() as u32));
                matrix[row][col] += coeff;
            }
            if sigma.is_identity() {
                rhs[row] = BigRational::one();
            }
        }

        solve_rational(&mut matrix, &mut rhs)
            .map_err(|()| Error::GramSingular { order: p, dimension: n })?;

        let mut entries = BTreeMap::new();
        for (ct, &idx) in &class_index {
            entries.insert(ct.clone(), rhs[idx].clone());
        }
        Ok(Self { order: p, dimension: n, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `Wg(n, σ)` as an exact rational.
    pub fn value(&self, sigma: &Permutation) -> &BigRational {
        assert_eq!(sigma.degree(), self.order);
        &self.entries[&sigma.cycle_type()]
    }

    pub fn value_of_type(&self, class: &CycleType) -> Option<&BigRational> {
        self.entries.get(class)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CycleType, &BigRational)> {
        self.entries.iter()
    }

    /// JSON dump: `{order, dimension, entries: [{cycle_type, numerator,
    /// denominator}]}`. Numerator and denominator are decimal strings since
    /// they routinely exceed 64 bits.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|(ct, v)| {
                serde_json::json!({
                    "cycle_type": ct.parts(),
                    "numerator": v.numer().to_string(),
                    "denominator": v.denom().to_string(),
                })
            })
            .collect();
        serde_json::json!({
            "order": self.order,
            "dimension": self.dimension,
            "entries": entries,
        })
    }

    /// Definitional check by full enumeration: the convolution of the table
    /// against `τ ↦ n^{#τ}` is the delta at the identity. Exact, no
    /// tolerance.
    pub fn verify_convolution(&self) -> bool {
        let perms = all_permutations(self.order);
        let n_big = BigInt::from(self.dimension);
        for sigma in &perms {
            let sigma_inv = sigma.inverse();
            let mut acc = BigRational::zero();
            for tau in &perms {
                let wg = self.value(&sigma_inv.compose(tau));
                acc += wg * BigRational::from(n_big.pow(tau.cycle_count() as u32));
            }
            let expected = if sigma.is_identity() {
                BigRational::one()
            } else {
                BigRational::zero()
            };
            if acc != expected {
                return false;
            }
        }
        true
    }
}

/// Gaussian elimination with partial (largest-magnitude) pivoting over the
/// rationals. Overwrites `rhs` with the solution.
fn solve_rational(matrix: &mut [Vec<BigRational>], rhs: &mut [BigRational]) -> Result<(), ()> {
    let m = rhs.len();
    for col in 0..m {
        let pivot_row = (col..m)
            .filter(|&r| !matrix[r][col].is_zero())
            .max_by(|&a, &b| matrix[a][col].abs().cmp(&matrix[b][col].abs()))
            .ok_or(())?;
        matrix.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let pivot = matrix[col][col].clone();
        for x in matrix[col].iter_mut() {
            *x /= &pivot;
        }
        rhs[col] /= &pivot;
        for row in 0..m {
            if row == col || matrix[row][col].is_zero() {
                continue;
            }
            let factor = matrix[row][col].clone();
            for c in 0..m {
                let delta = &factor * &matrix[col][c];
                matrix[row][c] -= delta;
            }
            let delta = &factor * &rhs[col];
            rhs[row] -= delta;
        }
    }
    Ok(())
}
