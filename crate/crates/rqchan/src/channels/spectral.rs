//! Spectral quantities of the super-operator: top singular values,
//! restricted norm, second eigenvalue modulus, fixed point, entropy.
//!
//! All iterative paths are matrix-free. Singular values come from Lanczos
//! with full reorthogonalization on the Hermitian F†F; the second
//! eigenvalue of the non-normal F comes from restarted Arnoldi after
//! deflating the known (1, vec(Λ) right, vec(I) left) eigen-pair with its
//! spectral projector. Plain power iteration is not used for |λ2|: on a
//! non-normal matrix its value estimate stalls well above the true
//! modulus.

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Eig, Eigh, SVD, UPLO};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use super::sampling::{sample_ginibre, trial_rng, ChannelSample};
use super::superop::{overlap_f, vec_mat, MaxEntangledVector, SuperOperator, SuperOperatorMode};
use super::C64;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogBase {
    Natural,
    Base(f64),
}

impl LogBase {
    fn convert(self, nats: f64) -> f64 {
        match self {
            LogBase::Natural => nats,
            LogBase::Base(b) => nats / b.ln(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralOptions {
    /// Residual tolerance on Lanczos Ritz values of F†F.
    pub tol: f64,
    /// Residual tolerance on the Arnoldi Ritz value for |λ2|.
    pub arnoldi_tol: f64,
    /// Lanczos basis cap; exceeding it without convergence is an error.
    pub max_basis: usize,
    /// Arnoldi subspace size per restart.
    pub arnoldi_dim: usize,
    /// Total operator-apply budget for Arnoldi and the fixed point.
    pub max_iter: usize,
    /// Fixed-point stopping tolerance on ‖Φ(X) − X‖₂.
    pub fixed_point_tol: f64,
    /// Seed for solver start vectors (independent of sample RNG streams).
    pub seed: u64,
    pub compute_s2: bool,
    pub compute_restricted: bool,
    pub compute_lambda2: bool,
    /// s1 − s2 below this multiple of `tol` sets the resolution flag.
    pub gap_resolution_factor: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            arnoldi_tol: 1e-8,
            max_basis: 300,
            arnoldi_dim: 200,
            max_iter: 10_000,
            fixed_point_tol: 1e-10,
            seed: 0,
            compute_s2: true,
            compute_restricted: true,
            compute_lambda2: true,
            gap_resolution_factor: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct FixedPointResult {
    pub lambda: Array2<C64>,
    pub iterations: usize,
    /// ‖Φ^{t+1}(I/n) − Φ^t(I/n)‖₂ at each step.
    pub step_residuals: Vec<f64>,
    /// ‖Φ^t(I/n) − Λ‖₂ against the converged iterate, index t from 0.
    pub distance_to_limit: Vec<f64>,
}

/// Everything spectral for one sample; `None` fields were not requested
/// or require d = n.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub f: f64,
    pub s1: f64,
    pub s2: Option<f64>,
    pub restricted_norm: Option<f64>,
    pub lambda2_abs: Option<f64>,
    pub entropy: Option<f64>,
    /// Total operator applies across all solvers.
    pub iters: usize,
    pub gap_below_resolution: bool,
}

fn inner(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &Array1<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<C64> {
    let g = sample_ginibre(dim, 1, 1.0, rng);
    let mut v = g.column(0).to_owned();
    let n = norm2(&v);
    v.mapv_inplace(|x| x / n);
    v
}

/// Lanczos with full reorthogonalization for the top `count` eigenvalues
/// of a Hermitian PSD operator. On breakdown (invariant subspace) a fresh
/// orthogonalized start vector continues the basis, so degenerate spectra
/// still yield `count` values.
pub(crate) fn lanczos_top<R, F>(
    dim: usize,
    apply: F,
    count: usize,
    opts: &SpectralOptions,
    rng: &mut R,
) -> Result<(Vec<f64>, IterationDiagnostics)>
where
    R: Rng + ?Sized,
    F: Fn(&Array1<C64>) -> Result<Array1<C64>>,
{
    assert!(count >= 1 && count <= dim);
    let max_basis = opts.max_basis.min(dim);
    let mut basis: Vec<Array1<C64>> = vec![random_unit(dim, rng)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new(); // betas[j] couples v_j and v_{j+1}
    let mut last_residual = f64::INFINITY;

    for j in 0..max_basis {
        let mut w = apply(&basis[j])?;
        let alpha = inner(&basis[j], &w).re;
        alphas.push(alpha);
        // two full reorthogonalization passes
        for _ in 0..2 {
            for v in &basis {
                let c = inner(v, &w);
                w.zip_mut_with(v, |wi, vi| *wi -= c * vi);
            }
        }
        let beta = norm2(&w);

        // Ritz extraction on the current tridiagonal
        let m = alphas.len();
        if m >= count {
            let mut t = Array2::<f64>::zeros((m, m));
            for i in 0..m {
                t[(i, i)] = alphas[i];
                if i + 1 < m {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let (evals, evecs) = t.eigh(UPLO::Lower)?;
            // ascending; top `count` are the last entries
            let scale = evals[m - 1].abs().max(1.0);
            let mut worst = 0.0f64;
            for idx in 0..count {
                let col = m - 1 - idx;
                let res = beta * evecs[(m - 1, col)].abs();
                worst = worst.max(res);
            }
            last_residual = worst;
            if worst < opts.tol * scale {
                let vals: Vec<f64> = (0..count)
                    .map(|idx| evals[m - 1 - idx].max(0.0).sqrt())
                    .collect();
                return Ok((
                    vals,
                    IterationDiagnostics {
                        iterations: m,
                        residual: worst,
                        converged: true,
                    },
                ));
            }
        }

        if j + 1 == max_basis {
            break;
        }
        if beta < 1e-13 {
            // invariant subspace: restart with a fresh orthogonal vector
            let mut v = random_unit(dim, rng);
            for _ in 0..2 {
                for b in &basis {
                    let c = inner(b, &v);
                    v.zip_mut_with(b, |vi, bi| *vi -= c * bi);
                }
            }
            let n = norm2(&v);
            if n < 1e-13 {
                break; // full space exhausted
            }
            v.mapv_inplace(|x| x / n);
            betas.push(0.0);
            basis.push(v);
        } else {
            w.mapv_inplace(|x| x / beta);
            betas.push(beta);
            basis.push(w);
        }
    }

    Err(Error::NotConverged {
        iterations: alphas.len(),
        residual: last_residual,
    })
}

/// Largest `count` singular values of F, matrix-free via Lanczos on F†F.
pub fn top_singular_values<R: Rng + ?Sized>(
    op: &SuperOperator,
    count: usize,
    opts: &SpectralOptions,
    rng: &mut R,
) -> Result<(Vec<f64>, IterationDiagnostics)> {
    let (_, dim) = op.dims();
    lanczos_top(
        dim,
        |x| op.apply_adjoint(&op.apply(&x.view())?.view()),
        count,
        opts,
        rng,
    )
}

/// Full-SVD oracle for the dense matrix of F.
pub fn top_singular_values_dense(f: &ArrayView2<C64>, count: usize) -> Result<Vec<f64>> {
    let (_, s, _) = f.svd(false, false)?;
    Ok(s.iter().take(count).copied().collect())
}

/// Operator norm of `F (I − ω_d)`, matrix-free: Lanczos on `P F†F P` with
/// `P` the rank-one deflation of the maximally entangled direction.
pub fn restricted_norm<R: Rng + ?Sized>(
    op: &SuperOperator,
    opts: &SpectralOptions,
    rng: &mut R,
) -> Result<(f64, IterationDiagnostics)> {
    let d = op.d();
    let omega = MaxEntangledVector::new(d).omega;
    let (_, dim) = op.dims();
    let project = |x: &Array1<C64>| -> Array1<C64> {
        let c = inner(&omega, x);
        let mut y = x.clone();
        y.zip_mut_with(&omega, |yi, oi| *yi -= c * oi);
        y
    };
    let (vals, diag) = lanczos_top(
        dim,
        |x| {
            let px = project(x);
            let gx = op.apply_adjoint(&op.apply(&px.view())?.view())?;
            Ok(project(&gx))
        },
        1,
        opts,
        rng,
    )?;
    Ok((vals[0], diag))
}

/// Dense oracle: top singular value of `F (I − ω_d)`.
pub fn restricted_norm_dense(f: &ArrayView2<C64>, d: usize) -> Result<f64> {
    let omega = MaxEntangledVector::new(d);
    let mut restricted = f.to_owned();
    let proj = omega.projector();
    let f_omega = f.dot(&proj);
    restricted -= &f_omega;
    Ok(top_singular_values_dense(&restricted.view(), 1)?[0])
}

/// |λ2(F)|, matrix-free: restarted Arnoldi on `B = F (I − r l†/(l†r))`
/// with `r = vec(Λ)` and `l = vec(I_n)`. Since `l` is the left eigenvector
/// of the eigenvalue 1, `B` has the spectrum of F with the 1 replaced by
/// 0; one-sided deflation with only `r` would be wrong on the non-normal
/// F.
pub fn second_eigenvalue_abs<R: Rng + ?Sized>(
    op: &SuperOperator,
    lambda: &ArrayView2<C64>,
    opts: &SpectralOptions,
    rng: &mut R,
) -> Result<(f64, IterationDiagnostics)> {
    let n = op.n();
    if op.d() != n {
        return Err(Error::DimensionMismatch(
            "second eigenvalue needs a square super-operator (d = n)".into(),
        ));
    }
    let r = vec_mat(&lambda.view());
    let l = vec_mat(&Array2::<C64>::eye(n).view());
    let denom = inner(&l, &r); // = tr Λ, should be 1
    if denom.norm() < 1e-8 {
        return Err(Error::DegenerateFixedPoint(format!(
            "trace of supplied fixed point is {denom}, cannot deflate"
        )));
    }
    let dim = n * n;
    let apply = |x: &Array1<C64>| -> Result<Array1<C64>> {
        let c = inner(&l, x) / denom;
        let mut px = x.clone();
        px.zip_mut_with(&r, |pi, ri| *pi -= c * ri);
        op.apply(&px.view())
    };

    let m = opts.arnoldi_dim.min(dim);
    let mut x = random_unit(dim, rng);
    let mut total_applies = 0usize;
    let mut best_residual = f64::INFINITY;

    while total_applies + m <= opts.max_iter.max(m) {
        // one Arnoldi sweep of size up to m
        let mut q: Vec<Array1<C64>> = vec![x.clone()];
        let mut h = Array2::<C64>::zeros((m + 1, m));
        let mut achieved = m;
        let mut breakdown = false;
        for j in 0..m {
            let mut w = apply(&q[j])?;
            total_applies += 1;
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let c = inner(qi, &w);
                    h[(i, j)] += c;
                    w.zip_mut_with(qi, |wi, vi| *wi -= c * vi);
                }
            }
            let nw = norm2(&w);
            h[(j + 1, j)] = C64::new(nw, 0.0);
            if nw < 1e-13 {
                achieved = j + 1;
                breakdown = true;
                break;
            }
            w.mapv_inplace(|v| v / nw);
            q.push(w);
        }
        let j = achieved;
        let hj = h.slice(ndarray::s![0..j, 0..j]).to_owned();
        let (evals, evecs) = hj.eig()?;
        let mut top_idx = 0usize;
        for i in 0..j {
            if evals[i].norm() > evals[top_idx].norm() {
                top_idx = i;
            }
        }
        let theta = evals[top_idx].norm();
        let sub = h[(j, j - 1)].norm();
        let residual = if breakdown {
            0.0
        } else {
            sub * evecs[(j - 1, top_idx)].norm()
        };
        best_residual = residual;
        if residual < opts.arnoldi_tol * theta.max(1e-3) {
            return Ok((
                theta,
                IterationDiagnostics {
                    iterations: total_applies,
                    residual,
                    converged: true,
                },
            ));
        }
        // restart from the dominant Ritz vector
        let mut next = Array1::<C64>::zeros(dim);
        for (i, qi) in q.iter().take(j).enumerate() {
            let c = evecs[(i, top_idx)];
            next.zip_mut_with(qi, |ni, vi| *ni += c * vi);
        }
        let nn = norm2(&next);
        if nn < 1e-13 {
            break;
        }
        next.mapv_inplace(|v| v / nn);
        x = next;
    }

    Err(Error::NotConverged {
        iterations: total_applies,
        residual: best_residual,
    })
}

/// Dense oracle: full non-symmetric eigensolve, moduli sorted descending,
/// second entry (the first is the eigenvalue 1).
pub fn second_eigenvalue_abs_dense(f: &ArrayView2<C64>) -> Result<f64> {
    if f.nrows() != f.ncols() {
        return Err(Error::DimensionMismatch(
            "second eigenvalue needs a square super-operator".into(),
        ));
    }
    let (evals, _) = f.to_owned().eig()?;
    let mut moduli: Vec<f64> = evals.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(moduli[1])
}

/// Fixed point of Φ by iterating from I/n. Each iterate is re-Hermitized
/// to stop roundoff drift; the trace is preserved by the channel itself.
pub fn fixed_point(op: &SuperOperator, tol: f64, max_iter: usize) -> Result<FixedPointResult> {
    let n = op.n();
    if op.d() != n {
        return Err(Error::DimensionMismatch(
            "fixed point needs a square super-operator (d = n)".into(),
        ));
    }
    let mut x = Array2::<C64>::eye(n).mapv(|v| v / n as f64);
    let mut iterates: Vec<Array2<C64>> = vec![x.clone()];
    let mut step_residuals: Vec<f64> = Vec::new();
    for t in 0..max_iter {
        let mut y = op.apply_channel(&x.view())?;
        let yh = y.t().mapv(|v| v.conj());
        y += &yh;
        y.mapv_inplace(|v| v * 0.5);
        let diff: f64 = y
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        step_residuals.push(diff);
        iterates.push(y.clone());
        x = y;
        if diff <= tol {
            let distance_to_limit = iterates
                .iter()
                .map(|it| {
                    it.iter()
                        .zip(x.iter())
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            return Ok(FixedPointResult {
                lambda: x,
                iterations: t + 1,
                step_residuals,
                distance_to_limit,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: *step_residuals.last().unwrap(),
    })
}

/// Von Neumann entropy −Σ μ log μ with 0·log 0 = 0. Rejects eigenvalues
/// below −10⁻⁸; smaller negative roundoff is clamped to zero.
pub fn von_neumann_entropy(rho: &ArrayView2<C64>, base: LogBase) -> Result<f64> {
    let (evals, _) = rho.to_owned().eigh(UPLO::Lower)?;
    let mut nats = 0.0;
    for &mu in evals.iter() {
        if mu < -1e-8 {
            return Err(Error::InvalidParameter(format!(
                "density matrix has eigenvalue {mu}"
            )));
        }
        if mu > 0.0 {
            nats -= mu * mu.ln();
        }
    }
    Ok(base.convert(nats))
}

/// One sample, all requested spectral quantities, matrix-free.
pub fn spectral_report(sample: &ChannelSample, opts: &SpectralOptions) -> Result<SpectralReport> {
    let op = SuperOperator::new(&sample.kraus, SuperOperatorMode::MatrixFree)?;
    let mut rng: ChaCha12Rng = trial_rng(opts.seed, u64::MAX);
    let f = overlap_f(sample);
    let mut iters = 0usize;

    let count = if opts.compute_s2 { 2 } else { 1 };
    let (svals, diag) = top_singular_values(&op, count, opts, &mut rng)?;
    iters += diag.iterations;
    let s1 = svals[0];
    let s2 = svals.get(1).copied();
    let gap_below_resolution = s2
        .map(|v| s1 - v < opts.gap_resolution_factor * opts.tol)
        .unwrap_or(false);

    let restricted = if opts.compute_restricted {
        let (r, diag) = restricted_norm(&op, opts, &mut rng)?;
        iters += diag.iterations;
        Some(r)
    } else {
        None
    };

    let (lambda2_abs, entropy) = if opts.compute_lambda2 && sample.d == sample.n {
        let fp = fixed_point(&op, opts.fixed_point_tol, opts.max_iter)?;
        iters += fp.iterations;
        let (l2, diag) = second_eigenvalue_abs(&op, &fp.lambda.view(), opts, &mut rng)?;
        iters += diag.iterations;
        let s = von_neumann_entropy(&fp.lambda.view(), LogBase::Natural)?;
        (Some(l2), Some(s))
    } else {
        (None, None)
    };

    Ok(SpectralReport {
        n: sample.n,
        d: sample.d,
        k: sample.k,
        f,
        s1,
        s2,
        restricted_norm: restricted,
        lambda2_abs,
        entropy,
        iters,
        gap_below_resolution,
    })
}
