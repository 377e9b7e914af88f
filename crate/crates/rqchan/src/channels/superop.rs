//! The Kraus / Choi / super-operator triple and the vectorization helpers
//! tying them together.
//!
//! `vec` is row-major throughout, so `vec(A X B†) = (A ⊗ conj(B)) vec(X)`
//! and the super-operator of `Φ(X) = Σ A_i X A_i†` is literally
//! `F = Σ A_i ⊗ conj(A_i)`, which is also the realignment of the Choi
//! matrix scaled by `d`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::sampling::reassemble_isometry;
use super::C64;
use crate::{Error, Result};

/// Refuse to materialize dense `F` above this many entries (~1.6 GB of
/// complex doubles).
pub const DEFAULT_DENSE_ENTRY_CAP: usize = 100_000_000;

/// Row-major flattening: `vec(X)[r·cols + c] = X[r, c]`.
pub fn vec_mat(x: &ArrayView2<C64>) -> Array1<C64> {
    Array1::from_iter(x.iter().copied())
}

/// Inverse of [`vec_mat`].
pub fn unvec(v: &ArrayView1<C64>, rows: usize, cols: usize) -> Result<Array2<C64>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| v[r * cols + c]))
}

/// Kronecker product under the row-major index `(a, b) ↦ a·rows(B) + b`.
pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &aij) in a.indexed_iter() {
        for ((p, q), &bpq) in b.indexed_iter() {
            out[(i * br + p, j * bc + q)] = aij * bpq;
        }
    }
    out
}

/// `Ω_d = d^{−1/2} Σ e_i ⊗ e_i`, which under row-major vec is
/// `vec(I_d)/√d`, together with its rank-one projector `ω_d`.
#[derive(Clone, Debug)]
pub struct MaxEntangledVector {
    pub d: usize,
    pub omega: Array1<C64>,
}

impl MaxEntangledVector {
    pub fn new(d: usize) -> Self {
        let scale = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        let eye = Array2::<C64>::eye(d);
        let omega = vec_mat(&eye.view()).mapv(|x| x * scale);
        Self { d, omega }
    }

    /// The projector `ω_d = Ω_d Ω_d†`.
    pub fn projector(&self) -> Array2<C64> {
        let dd = self.omega.len();
        Array2::from_shape_fn((dd, dd), |(r, c)| self.omega[r] * self.omega[c].conj())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuperOperatorMode {
    Dense,
    MatrixFree,
}

/// The matrix `F = Σ A_i ⊗ conj(A_i)` of `Φ` on vectorized inputs,
/// available dense or as apply callbacks. The matrix-free applies run as
/// two BLAS gemms against the reassembled isometry, not as `k` small
/// products.
#[derive(Clone, Debug)]
pub struct SuperOperator {
    n: usize,
    d: usize,
    k: usize,
    /// The `(nk) × d` isometry with the Kraus blocks interleaved, used by
    /// the reshaped-gemm applies.
    v: Array2<C64>,
    kraus: Vec<Array2<C64>>,
    dense: Option<Array2<C64>>,
}

impl SuperOperator {
    pub fn new(kraus: &[Array2<C64>], mode: SuperOperatorMode) -> Result<Self> {
        Self::with_entry_cap(kraus, mode, DEFAULT_DENSE_ENTRY_CAP)
    }

    pub fn with_entry_cap(
        kraus: &[Array2<C64>],
        mode: SuperOperatorMode,
        entry_cap: usize,
    ) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParameter("empty Kraus family".into()));
        }
        let (n, d) = kraus[0].dim();
        if kraus.iter().any(|a| a.dim() != (n, d)) {
            return Err(Error::DimensionMismatch(
                "Kraus operators must share one shape".into(),
            ));
        }
        let k = kraus.len();
        let v = reassemble_isometry(kraus);
        let dense = match mode {
            SuperOperatorMode::MatrixFree => None,
            SuperOperatorMode::Dense => {
                let entries = n * n * d * d;
                if entries > entry_cap {
                    return Err(Error::DenseTooLarge(entries, entry_cap));
                }
                let mut f = Array2::zeros((n * n, d * d));
                for a in kraus {
                    let conj_a = a.mapv(|x| x.conj());
                    f += &kron(&a.view(), &conj_a.view());
                }
                Some(f)
            }
        };
        Ok(Self {
            n,
            d,
            k,
            v,
            kraus: kraus.to_vec(),
            dense,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(n², d²)`: F maps C^{d²} to C^{n²}.
    pub fn dims(&self) -> (usize, usize) {
        (self.n * self.n, self.d * self.d)
    }

    pub fn kraus(&self) -> &[Array2<C64>] {
        &self.kraus
    }

    pub fn dense(&self) -> Option<&Array2<C64>> {
        self.dense.as_ref()
    }

    /// `Φ(X) = Σ A_i X A_i†` via `reshape(V X) · reshape(V)†`, two gemms.
    pub fn apply_channel(&self, x: &ArrayView2<C64>) -> Result<Array2<C64>> {
        let (n, d, k) = (self.n, self.d, self.k);
        if x.dim() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "channel input must be {d}x{d}, got {:?}",
                x.dim()
            )));
        }
        let vx = self.v.dot(x);
        let vx = vx.into_shape_with_order((n, k * d)).expect("contiguous");
        let w = self.v.view().into_shape_with_order((n, k * d)).expect("contiguous");
        let w_conj_t = w.mapv(|c| c.conj()).reversed_axes();
        Ok(vx.dot(&w_conj_t))
    }

    /// `Φ†(Y) = Σ A_i† Y A_i` via `V† · reshape(Y · reshape(V))`.
    pub fn apply_channel_adjoint(&self, y: &ArrayView2<C64>) -> Result<Array2<C64>> {
        let (n, d, k) = (self.n, self.d, self.k);
        if y.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "adjoint input must be {n}x{n}, got {:?}",
                y.dim()
            )));
        }
        let w = self.v.view().into_shape_with_order((n, k * d)).expect("contiguous");
        let yw = y.dot(&w);
        let yw = yw.into_shape_with_order((n * k, d)).expect("contiguous");
        let vh = self.v.mapv(|c| c.conj()).reversed_axes();
        Ok(vh.dot(&yw))
    }

    /// `F · vec(X)`: maps length `d²` to length `n²`.
    pub fn apply(&self, x: &ArrayView1<C64>) -> Result<Array1<C64>> {
        let xm = unvec(x, self.d, self.d)?;
        Ok(vec_mat(&self.apply_channel(&xm.view())?.view()))
    }

    /// `F† · vec(Y)`: maps length `n²` to length `d²`.
    pub fn apply_adjoint(&self, y: &ArrayView1<C64>) -> Result<Array1<C64>> {
        let ym = unvec(y, self.n, self.n)?;
        Ok(vec_mat(&self.apply_channel_adjoint(&ym.view())?.view()))
    }
}

/// Choi matrix `C = [Φ ⊗ id](ω_d) = (1/d) Σ_m vec(A_m) vec(A_m)†` on
/// `C^n ⊗ C^d` with the row-major pair index `(a, i) ↦ a·d + i`.
pub fn choi_matrix(kraus: &[Array2<C64>]) -> Array2<C64> {
    let (n, d) = kraus[0].dim();
    let nd = n * d;
    let mut c = Array2::zeros((nd, nd));
    let scale = 1.0 / d as f64;
    for a in kraus {
        let va = vec_mat(&a.view());
        for r in 0..nd {
            for s in 0..nd {
                c[(r, s)] += va[r] * va[s].conj() * scale;
            }
        }
    }
    c
}

/// Realignment of the Choi matrix, scaled back to the super-operator:
/// `F[(a,b), (i,j)] = d · C[(a,i), (b,j)]` (the `1/d` in `ω_d` is undone).
pub fn realign_choi(choi: &ArrayView2<C64>, n: usize, d: usize) -> Result<Array2<C64>> {
    if choi.dim() != (n * d, n * d) {
        return Err(Error::DimensionMismatch(format!(
            "Choi matrix must be {0}x{0}, got {1:?}",
            n * d,
            choi.dim()
        )));
    }
    let scale = C64::new(d as f64, 0.0);
    Ok(Array2::from_shape_fn((n * n, d * d), |(row, col)| {
        let (a, b) = (row / n, row % n);
        let (i, j) = (col / d, col % d);
        choi[(a * d + i, b * d + j)] * scale
    }))
}

/// The overlap `f = ‖F Ω_d‖² = ‖Φ(I_d)‖_F² / d`, computed matrix-free.
pub fn overlap_f(sample: &super::ChannelSample) -> f64 {
    let d = sample.d;
    let mut phi_eye = Array2::<C64>::zeros((sample.n, sample.n));
    for a in &sample.kraus {
        let ah = a.mapv(|x| x.conj()).reversed_axes();
        phi_eye += &a.dot(&ah);
    }
    phi_eye.iter().map(|x| x.norm_sqr()).sum::<f64>() / d as f64
}

#[cfg(test)]
mod tests {
    use super::super::sampling::{sample_ginibre, trial_rng, ChannelSample};
    use super::*;
    use ndarray_linalg::Eigh;

    fn random_superop(n: usize, d: usize, k: usize, seed: u64) -> (ChannelSample, SuperOperator) {
        let mut rng = trial_rng(seed, 0);
        let sample = ChannelSample::sample(n, d, k, &mut rng).unwrap();
        let op = SuperOperator::new(&sample.kraus, SuperOperatorMode::Dense).unwrap();
        (sample, op)
    }

    #[test]
    fn vec_unvec_roundtrip_and_ordering() {
        let x = Array2::from_shape_fn((2, 3), |(r, c)| C64::new((3 * r + c) as f64, 0.0));
        let v = vec_mat(&x.view());
        assert_eq!(v[1], C64::new(1.0, 0.0)); // row-major: entry (0,1)
        assert_eq!(v[3], C64::new(3.0, 0.0)); // entry (1,0)
        let back = unvec(&v.view(), 2, 3).unwrap();
        assert_eq!(x, back);
        assert!(unvec(&v.view(), 3, 3).is_err());
    }

    #[test]
    fn vec_identity_for_sandwich_products() {
        // vec(A X B†) = (A ⊗ conj(B)) vec(X)
        let mut rng = trial_rng(20, 0);
        let a = sample_ginibre(3, 4, 1.0, &mut rng);
        let b = sample_ginibre(3, 4, 1.0, &mut rng);
        let x = sample_ginibre(4, 4, 1.0, &mut rng);
        let bh = b.mapv(|c| c.conj()).reversed_axes();
        let lhs = vec_mat(&a.dot(&x).dot(&bh).view());
        let b_conj = b.mapv(|c| c.conj());
        let rhs = kron(&a.view(), &b_conj.view()).dot(&vec_mat(&x.view()));
        let err: f64 = lhs
            .iter()
            .zip(rhs.iter())
            .map(|(p, q)| (p - q).norm())
            .sum();
        assert!(err < 1e-12);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = trial_rng(21, 0);
        let a = sample_ginibre(2, 3, 1.0, &mut rng);
        let b = sample_ginibre(3, 2, 1.0, &mut rng);
        let c = sample_ginibre(3, 2, 1.0, &mut rng);
        let d = sample_ginibre(2, 3, 1.0, &mut rng);
        let lhs = kron(&a.view(), &b.view()).dot(&kron(&c.view(), &d.view()));
        let ac = a.dot(&c);
        let bd = b.dot(&d);
        let rhs = kron(&ac.view(), &bd.view());
        let err: f64 = lhs
            .iter()
            .zip(rhs.iter())
            .map(|(p, q)| (p - q).norm())
            .sum();
        assert!(err < 1e-12);
    }

    #[test]
    fn identity_kraus_gives_identity_superop() {
        let kraus = vec![Array2::<C64>::eye(2)];
        let op = SuperOperator::new(&kraus, SuperOperatorMode::Dense).unwrap();
        let f = op.dense().unwrap();
        let err: f64 = f
            .indexed_iter()
            .map(|((r, c), x)| {
                let t = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                (x - t).norm()
            })
            .sum();
        assert!(err < 1e-15);
    }

    #[test]
    fn dense_and_matrix_free_agree() {
        let (_, op) = random_superop(4, 4, 2, 30);
        let f = op.dense().unwrap();
        let mut rng = trial_rng(31, 0);
        for _ in 0..20 {
            let x = sample_ginibre(16, 1, 1.0, &mut rng);
            let x = x.column(0).to_owned();
            let dense_out = f.dot(&x);
            let free_out = op.apply(&x.view()).unwrap();
            let num: f64 = dense_out
                .iter()
                .zip(free_out.iter())
                .map(|(p, q)| (p - q).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den: f64 = dense_out.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt();
            assert!(num / den < 1e-10);
        }
    }

    #[test]
    fn adjoint_matches_dense_conjugate_transpose() {
        let (_, op) = random_superop(4, 3, 2, 32);
        let f = op.dense().unwrap();
        let fh = f.mapv(|c| c.conj()).reversed_axes();
        let mut rng = trial_rng(33, 0);
        let y = sample_ginibre(16, 1, 1.0, &mut rng);
        let y = y.column(0).to_owned();
        let dense_out = fh.dot(&y);
        let free_out = op.apply_adjoint(&y.view()).unwrap();
        let err: f64 = dense_out
            .iter()
            .zip(free_out.iter())
            .map(|(p, q)| (p - q).norm())
            .sum();
        assert!(err < 1e-10);
    }

    #[test]
    fn adjoint_maps_identity_to_identity() {
        // trace preservation: F† vec(I_n) = vec(I_d)
        let (_, op) = random_superop(6, 4, 3, 34);
        let eye_n = Array2::<C64>::eye(6);
        let out = op.apply_adjoint(&vec_mat(&eye_n.view()).view()).unwrap();
        let target = vec_mat(&Array2::<C64>::eye(4).view());
        let err: f64 = out
            .iter()
            .zip(target.iter())
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn choi_is_psd_trace_one_and_realigns_to_f() {
        let (sample, op) = random_superop(4, 3, 2, 35);
        let choi = choi_matrix(&sample.kraus);
        let trace: C64 = (0..choi.nrows()).map(|i| choi[(i, i)]).sum();
        assert!((trace - C64::new(1.0, 0.0)).norm() < 1e-10);
        let (eigs, _) = choi.eigh(ndarray_linalg::UPLO::Lower).unwrap();
        assert!(eigs.iter().all(|&e| e >= -1e-10));
        let f = realign_choi(&choi.view(), 4, 3).unwrap();
        let err: f64 = f
            .iter()
            .zip(op.dense().unwrap().iter())
            .map(|(p, q)| (p - q).norm())
            .sum();
        assert!(err < 1e-10);
    }

    #[test]
    fn max_entangled_vector_is_unit_projector_idempotent() {
        let me = MaxEntangledVector::new(3);
        let norm: f64 = me.omega.iter().map(|x| x.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        let p = me.projector();
        let p2 = p.dot(&p);
        let err: f64 = p2.iter().zip(p.iter()).map(|(a, b)| (a - b).norm()).sum();
        assert!(err < 1e-13);
        let tr: C64 = (0..9).map(|i| p[(i, i)]).sum();
        assert!((tr - C64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn overlap_is_one_for_k1() {
        let mut rng = trial_rng(36, 0);
        let sample = ChannelSample::sample(5, 5, 1, &mut rng).unwrap();
        assert!((overlap_f(&sample) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_matches_f_omega_norm() {
        let (sample, op) = random_superop(4, 4, 3, 37);
        let me = MaxEntangledVector::new(4);
        let image = op.dense().unwrap().dot(&me.omega);
        let direct: f64 = image.iter().map(|x| x.norm_sqr()).sum();
        assert!((overlap_f(&sample) - direct).abs() < 1e-12);
    }

    #[test]
    fn dense_mode_refuses_above_entry_cap() {
        let (sample, _) = random_superop(4, 4, 2, 38);
        let err = SuperOperator::with_entry_cap(&sample.kraus, SuperOperatorMode::Dense, 100)
            .unwrap_err();
        match err {
            crate::Error::DenseTooLarge(entries, cap) => {
                assert_eq!(entries, 256);
                assert_eq!(cap, 100);
            }
            other => panic!("unexpected error {other:?}"),
        }
        // matrix-free ignores the cap
        SuperOperator::with_entry_cap(&sample.kraus, SuperOperatorMode::MatrixFree, 100).unwrap();
    }
}
