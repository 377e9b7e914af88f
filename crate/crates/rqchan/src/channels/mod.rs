//! Random quantum channels from Haar isometries: sampling, the Kraus /
//! Choi / super-operator triple, spectral quantities (dense and
//! matrix-free), and the Gaussian comparison estimators.
//!
//! Index conventions, used consistently everywhere:
//! - `C^n ⊗ C^k` row index `(a, i) ↦ a·k + i` (`n`-major), so the Kraus
//!   operator `A_i` is the slice of rows `{a·k + i}` of the isometry `V`.
//! - `vec` is row-major stacking: `vec(X)[r·cols + c] = X[r, c]`. Under this
//!   convention `vec(A X B†) = (A ⊗ conj(B)) vec(X)` holds exactly, which
//!   makes `F = Σ A_i ⊗ conj(A_i)` the literal matrix of `Φ`.

mod gaussian;
mod sampling;
mod spectral;
mod superop;

pub use gaussian::{estimate_twirl_structure, gaussian_model_norm, TwirlEstimate};
pub use sampling::{
    kraus_blocks, reassemble_isometry, sample_ginibre, sample_haar_isometry, trial_rng,
    ChannelSample,
};
pub use spectral::{
    fixed_point, second_eigenvalue_abs, second_eigenvalue_abs_dense, spectral_report,
    top_singular_values, top_singular_values_dense, restricted_norm, restricted_norm_dense,
    von_neumann_entropy, FixedPointResult, IterationDiagnostics, LogBase, SpectralOptions,
    SpectralReport,
};
pub use superop::{
    choi_matrix, kron, overlap_f, realign_choi, unvec, vec_mat, MaxEntangledVector, SuperOperator,
    SuperOperatorMode, DEFAULT_DENSE_ENTRY_CAP,
};

pub type C64 = num_complex::Complex64;
