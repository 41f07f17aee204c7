//! Concentration of the multinomial log-likelihood-ratio statistic
//! Z = 2n·D(p̂‖p).
//!
//! The crate computes the exact law of Z by enumeration, estimates it by
//! seeded Monte Carlo, evaluates the known closed-form tail and moment bounds,
//! and certifies those bounds on parameter grids.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below name the concrete instantiations. Monte Carlo and the
//! certification harness run in `f64`.

// `!(x >= 0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod canonical;
pub mod error;
pub mod exact;
pub mod math;
pub mod montecarlo;
pub mod scalar;
pub mod special;
pub mod verify;

pub use bounds::{
    best_tail, threshold_for_test, BoundReport, ConstantsConfig, ConstantsOverride, MainParams, Method, SubGammaParams,
};
pub use canonical::to_canonical_string;
pub use error::{Error, Result};
pub use exact::{enumerate_law, law_log_mgf, law_moment, law_tail, ExactLaw, DEFAULT_OUTCOME_CAP};
pub use math::{
    bernstein_phi, binary_kl, chain_decompose, chi2_raw_moment, f_func, g_func, kl_divergence, phi, z_statistic,
    ChainParts, Counts, Distribution,
};
pub use montecarlo::{mc_coverage, mc_log_mgf, mc_moment, mc_tail, McEstimate, McRun};
pub use scalar::Real;
pub use verify::{verify, verify_all, GridSpec, PShape, Property, VerifyReport};

pub type DistributionF64 = Distribution<f64>;
pub type DistributionF32 = Distribution<f32>;
pub type ExactLawF64 = ExactLaw<f64>;
pub type ExactLawF32 = ExactLaw<f32>;
pub type SubGammaParamsF64 = SubGammaParams<f64>;
pub type SubGammaParamsF32 = SubGammaParams<f32>;
pub type BoundReportF64 = BoundReport<f64>;
pub type BoundReportF32 = BoundReport<f32>;
