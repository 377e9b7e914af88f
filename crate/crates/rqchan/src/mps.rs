//! Random translationally-invariant MPS ensemble: the embedding map
//! `E(X) = V X V†` (no partial trace), reduced density matrices
//! `ρ_l = E^l(Λ)`, and the purity/entropy experiments.
//!
//! Register ordering: bond register first, then sites, newest site
//! closest to the bond. `ρ_l` lives on the full `D·k^l`-dimensional space
//! exactly as written; the bond-traced `k^l`-dimensional physical state
//! is reported alongside it, since the two candidates genuinely differ
//! and only the physical one concentrates at purity `1/k^l`.

use ndarray::{Array2, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};
use serde::Serialize;

use crate::channels::{
    fixed_point, kron, trial_rng, von_neumann_entropy, ChannelSample, LogBase, SuperOperator,
    SuperOperatorMode, C64,
};
use crate::{Error, Result};

/// Largest full-state dimension `D·k^l` accepted by the dense pipeline.
pub const DENSE_ROW_BUDGET: usize = 4096;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MPSEnsembleSpec {
    /// Bond dimension D.
    pub d_bond: usize,
    /// Physical dimension k.
    pub k: usize,
    /// Number of sites l.
    pub l: usize,
    pub trials: usize,
    /// Iteration depth of the fixed-point approximant `ρ̃_l = E^l(Φ^t(I/D))`.
    pub t: usize,
    pub seed: u64,
}

impl MPSEnsembleSpec {
    pub fn new(d_bond: usize, k: usize, l: usize, trials: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            d_bond,
            k,
            l,
            trials,
            t: default_depth(d_bond),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 || self.trials < 1 || self.d_bond < 1 || self.k < 1 {
            return Err(Error::InvalidParameter(
                "MPS spec needs D, k, l, trials >= 1".into(),
            ));
        }
        let rows = self
            .k
            .checked_pow(self.l as u32)
            .and_then(|p| p.checked_mul(self.d_bond))
            .ok_or_else(|| Error::InvalidParameter("D*k^l overflows".into()))?;
        if rows > DENSE_ROW_BUDGET {
            return Err(Error::InvalidParameter(format!(
                "D*k^l = {rows} exceeds the dense budget {DENSE_ROW_BUDGET}"
            )));
        }
        Ok(())
    }
}

/// Default approximant depth: `ceil(5 ln D)` capped at 50.
pub fn default_depth(d_bond: usize) -> usize {
    (((d_bond as f64).ln() * 5.0).ceil() as usize).clamp(1, 50)
}

/// One step of the embedding: `X ↦ (V ⊗ I_K) X (V ⊗ I_K)†` where `K` is
/// the already-attached site space. Trace is preserved exactly (isometry)
/// and so is purity, which is why only the bond-traced state loses purity.
pub fn embed_apply(v: &ArrayView2<C64>, x: &ArrayView2<C64>) -> Result<Array2<C64>> {
    let (_, d) = v.dim();
    let rows = x.nrows();
    if x.ncols() != rows || rows % d != 0 || rows == 0 {
        return Err(Error::DimensionMismatch(format!(
            "embedding input must be square with side a multiple of {d}, got {:?}",
            x.dim()
        )));
    }
    let k_attached = rows / d;
    let w = kron(v, &Array2::<C64>::eye(k_attached).view());
    let wh = w.t().mapv(|c| c.conj());
    Ok(w.dot(x).dot(&wh))
}

/// Partial trace over the bond register (the first, `d_bond`-dimensional
/// factor), leaving the `k^l`-dimensional physical state.
pub fn trace_out_bond(rho: &ArrayView2<C64>, d_bond: usize) -> Result<Array2<C64>> {
    let rows = rho.nrows();
    if rho.ncols() != rows || rows % d_bond != 0 {
        return Err(Error::DimensionMismatch(format!(
            "cannot trace a {rows}x{} matrix over a {d_bond}-dimensional bond",
            rho.ncols()
        )));
    }
    let phys = rows / d_bond;
    let mut out = Array2::<C64>::zeros((phys, phys));
    for b in 0..d_bond {
        for s in 0..phys {
            for s2 in 0..phys {
                out[(s, s2)] += rho[(b * phys + s, b * phys + s2)];
            }
        }
    }
    Ok(out)
}

/// `tr(ρ²)` via the squared Frobenius norm (ρ Hermitian).
pub fn purity(rho: &ArrayView2<C64>) -> f64 {
    rho.iter().map(|x| x.norm_sqr()).sum()
}

/// TI-MPS amplitude `tr[A_{i_N} ··· A_{i_1}]`, `indices` listed from site
/// 1 upward and applied right to left.
pub fn mps_amplitude(kraus: &[Array2<C64>], indices: &[usize]) -> Result<C64> {
    let d = kraus[0].nrows();
    let mut acc = Array2::<C64>::eye(d);
    for &i in indices {
        let a = kraus.get(i).ok_or_else(|| {
            Error::InvalidParameter(format!("site index {i} out of range for k = {}", kraus.len()))
        })?;
        acc = a.dot(&acc);
    }
    Ok((0..d).map(|j| acc[(j, j)]).sum())
}

/// `ρ_l = E^l(Λ)` on the full bond ⊗ sites space.
#[derive(Clone, Debug)]
pub struct ReducedState {
    pub l: usize,
    pub matrix: Array2<C64>,
    pub purity: f64,
    pub entropy: f64,
}

pub fn reduced_density(
    sample: &ChannelSample,
    l: usize,
    fixed_point_tol: f64,
) -> Result<ReducedState> {
    if sample.d != sample.n {
        return Err(Error::DimensionMismatch(
            "MPS ensemble needs d = n = D".into(),
        ));
    }
    let op = SuperOperator::new(&sample.kraus, SuperOperatorMode::MatrixFree)?;
    let fp = fixed_point(&op, fixed_point_tol, 10_000)?;
    embed_l(sample, &fp.lambda, l)
}

fn embed_l(sample: &ChannelSample, start: &Array2<C64>, l: usize) -> Result<ReducedState> {
    let rows = sample
        .k
        .checked_pow(l as u32)
        .and_then(|p| p.checked_mul(sample.n))
        .filter(|&r| r <= DENSE_ROW_BUDGET)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("D*k^l exceeds the dense budget {DENSE_ROW_BUDGET}"))
        })?;
    let mut rho = start.clone();
    for _ in 0..l {
        rho = embed_apply(&sample.v.view(), &rho.view())?;
    }
    debug_assert_eq!(rho.nrows(), rows);
    let p = purity(&rho.view());
    let entropy = von_neumann_entropy(&rho.view(), LogBase::Natural)?;
    Ok(ReducedState {
        l,
        matrix: rho,
        purity: p,
        entropy,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MPSTrialRow {
    pub trial: usize,
    pub d_bond: usize,
    pub k: usize,
    pub l: usize,
    pub t: usize,
    /// Full-state ρ_l (bond included).
    pub purity: f64,
    pub entropy: f64,
    /// Bond-traced physical state.
    pub purity_physical: f64,
    pub entropy_physical: f64,
    /// Full-state purity of the approximant ρ̃_l = E^l(Φ^t(I/D)).
    pub purity_approx: f64,
    /// Trace-norm gap ‖ρ_l − ρ̃_l‖₁.
    pub tv_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MPSSummary {
    pub spec: MPSEnsembleSpec,
    pub rows: Vec<MPSTrialRow>,
    pub mean_purity: f64,
    pub mean_entropy: f64,
    pub mean_purity_physical: f64,
    pub se_purity_physical: f64,
    pub mean_entropy_physical: f64,
    pub se_entropy_physical: f64,
    pub mean_tv_gap: f64,
}

fn trace_norm(a: &Array2<C64>) -> Result<f64> {
    let (evals, _) = a.eigh(UPLO::Lower)?;
    Ok(evals.iter().map(|e| e.abs()).sum())
}

/// One trial of the purity experiment, reproducible from `(seed, trial)`.
pub fn mps_trial(spec: &MPSEnsembleSpec, trial: usize) -> Result<MPSTrialRow> {
    let mut rng = trial_rng(spec.seed, trial as u64);
    let sample = ChannelSample::sample(spec.d_bond, spec.d_bond, spec.k, &mut rng)?;
    let exact = reduced_density(&sample, spec.l, 1e-12)?;

    let op = SuperOperator::new(&sample.kraus, SuperOperatorMode::MatrixFree)?;
    let mut approx_seed = Array2::<C64>::eye(spec.d_bond).mapv(|v| v / spec.d_bond as f64);
    for _ in 0..spec.t {
        approx_seed = op.apply_channel(&approx_seed.view())?;
    }
    let approx = embed_l(&sample, &approx_seed, spec.l)?;

    let physical = trace_out_bond(&exact.matrix.view(), spec.d_bond)?;
    let diff = &exact.matrix - &approx.matrix;
    Ok(MPSTrialRow {
        trial,
        d_bond: spec.d_bond,
        k: spec.k,
        l: spec.l,
        t: spec.t,
        purity: exact.purity,
        entropy: exact.entropy,
        purity_physical: purity(&physical.view()),
        entropy_physical: von_neumann_entropy(&physical.view(), LogBase::Natural)?,
        purity_approx: approx.purity,
        tv_gap: trace_norm(&diff)?,
    })
}

pub fn mps_purity_experiment(spec: &MPSEnsembleSpec) -> Result<MPSSummary> {
    spec.validate()?;
    let rows: Vec<MPSTrialRow> = (0..spec.trials)
        .map(|trial| mps_trial(spec, trial))
        .collect::<Result<_>>()?;
    summarize(spec, rows)
}

/// Aggregates per-trial rows (however they were produced) into the
/// summary; deterministic associative reduction over the ordered rows.
pub fn summarize(spec: &MPSEnsembleSpec, rows: Vec<MPSTrialRow>) -> Result<MPSSummary> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no trial rows to summarize".into()));
    }
    let mean = |f: fn(&MPSTrialRow) -> f64| -> f64 {
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    };
    let se = |f: fn(&MPSTrialRow) -> f64, m: f64| -> f64 {
        let var = rows.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / rows.len() as f64;
        (var / rows.len() as f64).sqrt()
    };
    let mean_pp = mean(|r| r.purity_physical);
    let mean_ep = mean(|r| r.entropy_physical);
    Ok(MPSSummary {
        spec: *spec,
        mean_purity: mean(|r| r.purity),
        mean_entropy: mean(|r| r.entropy),
        mean_purity_physical: mean_pp,
        se_purity_physical: se(|r| r.purity_physical, mean_pp),
        mean_entropy_physical: mean_ep,
        se_entropy_physical: se(|r| r.entropy_physical, mean_ep),
        mean_tv_gap: mean(|r| r.tv_gap),
        rows,
    })
}
