//! Monte Carlo ground truth for the closed-form errors.
//!
//! Signal and observation paths are simulated on a uniform time grid and fed
//! to estimators that never touch the divergence integrals: a von Mises
//! conditional-mean oracle for the non-causal error and a phase-grid Bayes
//! filter for the causal error of a single wave.
//!
//! Every path (or batch of draws) owns a ChaCha stream selected by
//! `(seed, index)`, and results are reduced in index order, so estimates are
//! bit-identical for any number of worker threads.

mod causal;
mod fastexp;
mod oracle;
mod paths;
mod rng;

pub use causal::{cmmse_causal_estimate, cmmse_causal_estimate_refined, PhaseGridPosterior};
pub use oracle::{
    divergence_log_bessel_oracle, ks_envelope_test, mmse_sum_oracle, mmse_sum_oracle_quadrature,
    mmse_tone_oracle, mmse_tone_oracle_quadrature, rician_cdf_at_sorted, sample_envelope,
    KsOutcome,
};
pub use paths::{
    observe, sample_gaussian_path, sample_tone_path, Latent, ObservationPath, PathKind, SampledPath,
};
pub use rng::path_rng;

use crate::error::{domain, Result};

/// Observation horizon `T` and integer wave indices `k_i`; wave `i` has
/// angular frequency `2π·k_i/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneGrid {
    horizon: f64,
    wave_indices: Vec<u32>,
}

impl ToneGrid {
    pub fn new(horizon: f64, wave_indices: Vec<u32>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(domain(format!("horizon must be positive, got {horizon}")));
        }
        if wave_indices.is_empty() {
            return Err(domain("tone grid needs at least one wave"));
        }
        if wave_indices[0] < 1 || wave_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain(
                "wave indices must be strictly increasing positive integers",
            ));
        }
        Ok(Self {
            horizon,
            wave_indices,
        })
    }

    /// `T = 1`, `k = 1..=n`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(1.0, (1..=n as u32).collect())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn wave_indices(&self) -> &[u32] {
        &self.wave_indices
    }

    pub fn len(&self) -> usize {
        self.wave_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wave_indices.is_empty()
    }

    pub fn angular_frequency(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.wave_indices[i] as f64 / self.horizon
    }
}

/// Monte Carlo controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSpec {
    pub paths: usize,
    pub dt: f64,
    pub theta_grid_size: usize,
    pub seed: u64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self {
            paths: 20_000,
            dt: 1.0 / 8192.0,
            theta_grid_size: 512,
            seed: 42,
        }
    }
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 1 {
            return Err(domain("paths must be >= 1"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.theta_grid_size < 16 {
            return Err(domain("theta_grid_size must be >= 16"));
        }
        Ok(())
    }

    /// Number of steps of size `dt` covering `[0, horizon]`; `dt` must divide
    /// the horizon.
    pub fn steps(&self, horizon: f64) -> Result<usize> {
        self.validate()?;
        let n = horizon / self.dt;
        let rounded = n.round();
        if rounded < 1.0 || (n - rounded).abs() > 1e-9 * rounded {
            return Err(domain(format!(
                "dt = {} does not divide the horizon {horizon}",
                self.dt
            )));
        }
        Ok(rounded as usize)
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl MonteCarloEstimate {
    /// Mean and standard error of `samples`, summed in order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            estimate: mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// Mean and standard error from running `(count, Σx, Σx²)` totals.
    pub(crate) fn from_moments(count: usize, sum: f64, sum_sq: f64) -> Self {
        let n = count as f64;
        let mean = sum / n;
        let var = if count > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            estimate: mean,
            std_error: (var / n).sqrt(),
        }
    }
}
