//! Estimation error of a normalized sum of independent random-phase
//! narrowband waves observed in white Gaussian noise.
//!
//! * [`specfun`]: scaled Bessel functions and the Rician / Rayleigh envelope
//!   log-densities.
//! * [`divergence`]: the envelope divergence `D(q)`, its derivative, the
//!   multi-wave sum and the small-SNR curvature.
//! * [`mmse`]: causal and non-causal errors for tone sums and Gaussian sums.
//! * [`simkit`]: Monte Carlo paths and estimator oracles.

pub mod divergence;
pub mod error;
pub mod mmse;
pub mod quadrature;
pub mod simkit;
pub mod specfun;

pub use divergence::{
    divergence_derivative, divergence_single, divergence_sum, estimate_d2_at_zero,
    AsymptoticCoefficients, BiasedDivergence, DivergenceModel, DivergenceResult, QuadratureSpec,
};
pub use error::{Error, Result};
pub use mmse::{
    asymptotic_errors, check_bridge, cmmse_gaussian, cmmse_tone_sum, mmse_gaussian, mmse_tone_sum,
    BridgeResiduals, ChannelSnr, ErrorComponent, ErrorPair, SpectrumAllocation,
};
pub use simkit::{MonteCarloEstimate, MonteCarloSpec, ToneGrid};
