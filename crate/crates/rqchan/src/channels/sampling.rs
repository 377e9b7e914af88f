//! Ginibre and Haar-isometry sampling, Kraus block slicing, and the
//! split-stream RNG scheme used by every Monte Carlo experiment.

use ndarray::{Array2, Axis};
use ndarray_linalg::QR;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::C64;
use crate::{Error, Result};

/// Per-trial RNG: ChaCha stream `trial` of the cipher keyed by the master
/// seed. The same `(seed, trial)` pair reproduces the same sample
/// bit-for-bit regardless of how trials are scheduled.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(trial.into());
    rng
}

/// `rows × cols` matrix of i.i.d. centered complex Gaussians with
/// `E|Y_{ij}|² = variance` (real and imaginary parts each `variance/2`).
pub fn sample_ginibre<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> Array2<C64> {
    assert!(rows >= 1 && cols >= 1 && variance > 0.0);
    let sigma = (variance / 2.0).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(sigma * re, sigma * im)
    })
}

/// Haar-distributed isometry (`rows ≥ cols`): QR of a Ginibre matrix with
/// the R-diagonal phase correction. Plain QR is not Haar-distributed; each
/// column of Q is multiplied by `conj(R_jj)/|R_jj|` so the distribution is
/// invariant under left multiplication by any fixed unitary.
pub fn sample_haar_isometry<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Array2<C64>> {
    if rows < cols {
        return Err(Error::InvalidParameter(format!(
            "isometry needs rows >= cols, got {rows} < {cols}"
        )));
    }
    let g = sample_ginibre(rows, cols, 1.0, rng);
    let (mut q, r) = g.qr()?;
    for (j, mut col) in q.axis_iter_mut(Axis(1)).enumerate() {
        let rjj = r[(j, j)];
        let phase = rjj.conj() / rjj.norm();
        col.mapv_inplace(|x| x * phase);
    }
    Ok(q)
}

/// The `k` Kraus blocks of an `(nk) × d` isometry under the `(a, i) ↦ a·k + i`
/// row convention: `A_i[a, j] = V[a·k + i, j]`.
pub fn kraus_blocks(v: &Array2<C64>, n: usize, k: usize) -> Result<Vec<Array2<C64>>> {
    if v.nrows() != n * k {
        return Err(Error::DimensionMismatch(format!(
            "isometry has {} rows, expected n*k = {}",
            v.nrows(),
            n * k
        )));
    }
    let d = v.ncols();
    let mut blocks = Vec::with_capacity(k);
    for i in 0..k {
        let mut a = Array2::zeros((n, d));
        for row in 0..n {
            a.row_mut(row).assign(&v.row(row * k + i));
        }
        blocks.push(a);
    }
    Ok(blocks)
}

/// Inverse of [`kraus_blocks`]: reassembles `V = Σ A_i ⊗ e_i`.
pub fn reassemble_isometry(kraus: &[Array2<C64>]) -> Array2<C64> {
    let k = kraus.len();
    let (n, d) = kraus[0].dim();
    let mut v = Array2::zeros((n * k, d));
    for (i, a) in kraus.iter().enumerate() {
        for row in 0..n {
            v.row_mut(row * k + i).assign(&a.row(row));
        }
    }
    v
}

/// One draw of `(V, {A_i})` from the Haar ensemble at parameters `(n, d, k)`.
#[derive(Clone, Debug)]
pub struct ChannelSample {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub v: Array2<C64>,
    pub kraus: Vec<Array2<C64>>,
}

impl ChannelSample {
    pub fn sample<R: Rng + ?Sized>(n: usize, d: usize, k: usize, rng: &mut R) -> Result<Self> {
        if d > n * k {
            return Err(Error::InvalidParameter(format!(
                "d = {d} exceeds nk = {} (no isometry exists)",
                n * k
            )));
        }
        let v = sample_haar_isometry(n * k, d, rng)?;
        let kraus = kraus_blocks(&v, n, k)?;
        Ok(Self { n, d, k, v, kraus })
    }

    /// Frobenius norm of `V†V − I_d`.
    pub fn isometry_residual(&self) -> f64 {
        let vhv = self.v.t().mapv(|x| x.conj()).dot(&self.v);
        frob_minus_identity(&vhv)
    }

    /// Frobenius norm of `Σ A_i†A_i − I_d` (trace preservation of `Φ`).
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.d;
        let mut acc = Array2::<C64>::zeros((d, d));
        for a in &self.kraus {
            acc += &a.t().mapv(|x| x.conj()).dot(a);
        }
        frob_minus_identity(&acc)
    }
}

fn frob_minus_identity(m: &Array2<C64>) -> f64 {
    let mut total = 0.0;
    for ((i, j), x) in m.indexed_iter() {
        let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        total += (x - target).norm_sqr();
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn ginibre_mean_and_variance() {
        let mut rng = trial_rng(11, 0);
        let trials = 20_000;
        let mut mean = C64::new(0.0, 0.0);
        let mut second = 0.0;
        for _ in 0..trials {
            let y = sample_ginibre(4, 4, 1.0, &mut rng);
            mean += y[(0, 0)];
            second += y[(1, 1)].norm_sqr();
        }
        let mean = mean / trials as f64;
        // SE of the mean of a unit-variance complex entry
        let se = 1.0 / (trials as f64).sqrt();
        assert!(mean.norm() < 3.0 * se, "mean = {mean}");
        assert!((second / trials as f64 - 1.0).abs() < 3.0 * se * 2.0);
    }

    #[test]
    fn ginibre_entry_variance_matches_parameter() {
        let mut rng = trial_rng(12, 0);
        let trials = 50_000;
        let variance = 1.0 / 16.0; // 1/(nk) at n=8, k=2
        let mut acc = 0.0;
        for _ in 0..trials {
            let y = sample_ginibre(2, 2, variance, &mut rng);
            acc += y[(0, 0)].norm_sqr();
        }
        let est = acc / trials as f64;
        let se = variance / (trials as f64).sqrt();
        assert!((est - variance).abs() < 3.0 * se, "est = {est}");
    }

    #[test]
    fn ginibre_wishart_matches_marchenko_pastur_moments() {
        // N⁻¹ · spectrum of Y†Y for Y Gin(4N, N; 1) has MP(4) moments:
        // mean 4, variance 4, within 5%
        use ndarray_linalg::Eigh;
        let mut rng = trial_rng(13, 0);
        let n_dim = 64;
        let m_dim = 4 * n_dim;
        let mut eigs: Vec<f64> = Vec::new();
        for _ in 0..8 {
            let y = sample_ginibre(m_dim, n_dim, 1.0, &mut rng);
            let w = y.t().mapv(|x| x.conj()).dot(&y).mapv(|x| x / n_dim as f64);
            let (vals, _) = w.eigh(ndarray_linalg::UPLO::Lower).unwrap();
            eigs.extend(vals.iter());
        }
        let mean: f64 = eigs.iter().sum::<f64>() / eigs.len() as f64;
        let var: f64 =
            eigs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / eigs.len() as f64;
        assert!((mean - 4.0).abs() / 4.0 < 0.05, "mean = {mean}");
        assert!((var - 4.0).abs() / 4.0 < 0.05, "var = {var}");
    }

    #[test]
    fn haar_isometry_is_isometric() {
        let mut rng = trial_rng(1, 0);
        let v = sample_haar_isometry(32, 8, &mut rng).unwrap();
        let vhv = v.t().mapv(|x| x.conj()).dot(&v);
        assert!(frob_minus_identity(&vhv) < 1e-12);
        assert!(sample_haar_isometry(4, 8, &mut rng).is_err());
    }

    #[test]
    fn haar_first_entry_moment() {
        let mut rng = trial_rng(2, 0);
        let rows = 24;
        let trials = 20_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let v = sample_haar_isometry(rows, 2, &mut rng).unwrap();
            acc += v[(0, 0)].norm_sqr();
        }
        let est = acc / trials as f64;
        let expected = 1.0 / rows as f64;
        // |V11|² is Beta(1, rows−1): variance ≈ 1/rows² · (rows−1)/(rows+1)
        let se = expected / (trials as f64).sqrt();
        assert!((est - expected).abs() < 3.0 * se, "est = {est}");
    }

    #[test]
    fn haar_invariance_under_fixed_unitary() {
        // Kolmogorov–Smirnov on |entry| of V vs UV for a fixed unitary U
        let mut rng = trial_rng(3, 0);
        let rows = 8;
        let u = sample_haar_isometry(rows, rows, &mut rng).unwrap();
        let draws = 10_000;
        let mut plain: Vec<f64> = Vec::with_capacity(draws);
        let mut rotated: Vec<f64> = Vec::with_capacity(draws);
        for _ in 0..draws {
            let v = sample_haar_isometry(rows, 1, &mut rng).unwrap();
            plain.push(v[(0, 0)].norm());
            let w = sample_haar_isometry(rows, 1, &mut rng).unwrap();
            let uw = u.dot(&w);
            rotated.push(uw[(0, 0)].norm());
        }
        plain.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rotated.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = ks_statistic(&plain, &rotated);
        // α = 0.01 two-sample threshold: 1.628·√(2/n)
        let threshold = 1.628 * (2.0 / draws as f64).sqrt();
        assert!(ks < threshold, "KS = {ks}, threshold = {threshold}");
    }

    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let mut max_gap = 0.0f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let gap = (i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs();
            max_gap = max_gap.max(gap);
        }
        max_gap
    }

    #[test]
    fn kraus_blocks_roundtrip() {
        let mut rng = trial_rng(4, 0);
        let sample = ChannelSample::sample(3, 4, 2, &mut rng).unwrap();
        assert!(sample.isometry_residual() < 1e-12);
        assert!(sample.trace_preservation_residual() < 1e-12);
        // reassembly reproduces V bit-exactly
        let back = reassemble_isometry(&sample.kraus);
        assert_eq!(sample.v, back);
    }

    #[test]
    fn kraus_k1_is_v_itself() {
        let mut rng = trial_rng(5, 0);
        let sample = ChannelSample::sample(6, 3, 1, &mut rng).unwrap();
        assert_eq!(sample.kraus.len(), 1);
        assert_eq!(sample.kraus[0], sample.v);
    }

    #[test]
    fn trial_rng_is_reproducible_and_stream_separated() {
        let a: Vec<u64> = {
            let mut r = trial_rng(99, 7);
            (0..4).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = trial_rng(99, 7);
            (0..4).map(|_| r.random()).collect()
        };
        let c: Vec<u64> = {
            let mut r = trial_rng(99, 8);
            (0..4).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        let _unused: Array1<f64> = Array1::zeros(1);
    }
}
