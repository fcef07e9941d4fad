//! Causal error of a single random-phase wave by exact Bayes filtering on a
//! grid of candidate phases.
//!
//! Given observations up to `t_k`, the posterior over the grid phases
//! `θ_j = 2πj/G` is proportional to the Girsanov likelihood
//! `exp(Σ √q·ξ_j(t)·Δη − (q/2)·ξ_j(t)²·dt)` and the causal estimate is
//! `Σ_j p_j·ξ_j(t_k)`. For a single tone `ξ_j(t) = A·(cos ωt·cos θ_j − sin ωt·sin θ_j)`,
//! so the estimate only needs the posterior means of `A cos θ` and `A sin θ`.

use super::fastexp;
use super::paths::tone_path_with;
use super::rng::path_rng;
use super::{MonteCarloEstimate, MonteCarloSpec, ToneGrid};
use crate::error::{domain, Error, Result};
use crate::mmse::{ChannelSnr, SpectrumAllocation};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::TAU;

const LANES: usize = 8;

/// Running posterior over a uniform grid of phases.
#[derive(Debug, Clone)]
pub struct PhaseGridPosterior {
    amp_cos: Vec<f64>,
    amp_sin: Vec<f64>,
    /// Log weights, shifted each step by the previous maximum.
    log_w: Vec<f64>,
    shift: f64,
    sqrt_q: f64,
    half_q_dt: f64,
    mean_amp_cos: f64,
    mean_amp_sin: f64,
}

#[derive(Default)]
struct Sums {
    total: f64,
    amp_cos: f64,
    amp_sin: f64,
    max: f64,
}

impl PhaseGridPosterior {
    /// Uniform prior over `grid_size` phases for a tone of amplitude
    /// `amplitude`, observed at SNR `snr` with step `dt`.
    pub fn new(grid_size: usize, amplitude: f64, snr: ChannelSnr, dt: f64) -> Self {
        let (amp_cos, amp_sin) = (0..grid_size)
            .map(|j| {
                let theta = TAU * j as f64 / grid_size as f64;
                (amplitude * theta.cos(), amplitude * theta.sin())
            })
            .unzip();
        Self {
            amp_cos,
            amp_sin,
            log_w: vec![0.0; grid_size],
            shift: 0.0,
            sqrt_q: snr.value().sqrt(),
            half_q_dt: 0.5 * snr.value() * dt,
            mean_amp_cos: 0.0,
            mean_amp_sin: 0.0,
        }
    }

    /// Posterior mean of the signal at a time where `cos ωt = c`, `sin ωt = s`.
    pub fn signal_estimate(&self, c: f64, s: f64) -> f64 {
        c * self.mean_amp_cos - s * self.mean_amp_sin
    }

    /// Fold in one observation increment `d_eta` taken at `cos ωt = c`,
    /// `sin ωt = s`, then renormalize.
    pub fn assimilate(&mut self, c: f64, s: f64, d_eta: f64) -> Result<()> {
        let gain = self.sqrt_q * d_eta;
        let sums = sweep(
            &self.amp_cos,
            &self.amp_sin,
            &mut self.log_w,
            c,
            s,
            gain,
            self.half_q_dt,
            self.shift,
        );
        if !(sums.total.is_finite() && sums.total > 0.0) {
            return Err(Error::Numerical(format!(
                "phase posterior collapsed (weight total {})",
                sums.total
            )));
        }
        self.shift = sums.max;
        self.mean_amp_cos = sums.amp_cos / sums.total;
        self.mean_amp_sin = sums.amp_sin / sums.total;
        Ok(())
    }

    /// Normalized posterior weights.
    pub fn weights(&self) -> Vec<f64> {
        let w: Vec<f64> = self.log_w.iter().map(|l| (l - self.shift).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    amp_cos: &[f64],
    amp_sin: &[f64],
    log_w: &mut [f64],
    c: f64,
    s: f64,
    gain: f64,
    half_q_dt: f64,
    shift: f64,
) -> Sums {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { sweep_avx512(amp_cos, amp_sin, log_w, c, s, gain, half_q_dt, shift) };
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { sweep_avx2(amp_cos, amp_sin, log_w, c, s, gain, half_q_dt, shift) };
        }
    }
    sweep_body(amp_cos, amp_sin, log_w, c, s, gain, half_q_dt, shift)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn sweep_avx2(
    amp_cos: &[f64],
    amp_sin: &[f64],
    log_w: &mut [f64],
    c: f64,
    s: f64,
    gain: f64,
    half_q_dt: f64,
    shift: f64,
) -> Sums {
    sweep_body(amp_cos, amp_sin, log_w, c, s, gain, half_q_dt, shift)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[allow(clippy::too_many_arguments)]
unsafe fn sweep_avx512(
    amp_cos: &[f64],
    amp_sin: &[f64],
    log_w: &mut [f64],
    c: f64,
    s: f64,
    gain: f64,
    half_q_dt: f64,
    shift: f64,
) -> Sums {
    sweep_body(amp_cos, amp_sin, log_w, c, s, gain, half_q_dt, shift)
}

// Lane-wise accumulators fix the summation order, so the AVX2 and baseline
// builds of this loop give bit-identical sums.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn sweep_body(
    amp_cos: &[f64],
    amp_sin: &[f64],
    log_w: &mut [f64],
    c: f64,
    s: f64,
    gain: f64,
    half_q_dt: f64,
    shift: f64,
) -> Sums {
    let mut total = [0.0; LANES];
    let mut sum_c = [0.0; LANES];
    let mut sum_s = [0.0; LANES];
    let mut max = [f64::NEG_INFINITY; LANES];

    let mut lw = log_w.chunks_exact_mut(LANES);
    let mut ac = amp_cos.chunks_exact(LANES);
    let mut as_ = amp_sin.chunks_exact(LANES);
    for ((l, a), b) in (&mut lw).zip(&mut ac).zip(&mut as_) {
        for i in 0..LANES {
            let x = c * a[i] - s * b[i];
            let v = l[i] + (gain * x - half_q_dt * (x * x)) - shift;
            l[i] = v;
            let w = fastexp::exp(v);
            total[i] += w;
            sum_c[i] += w * a[i];
            sum_s[i] += w * b[i];
            max[i] = if v > max[i] { v } else { max[i] };
        }
    }
    let mut out = Sums {
        total: total.iter().sum(),
        amp_cos: sum_c.iter().sum(),
        amp_sin: sum_s.iter().sum(),
        max: max.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    for ((l, &a), &b) in lw
        .into_remainder()
        .iter_mut()
        .zip(ac.remainder())
        .zip(as_.remainder())
    {
        let x = c * a - s * b;
        let v = *l + (gain * x - half_q_dt * (x * x)) - shift;
        *l = v;
        let w = fastexp::exp(v);
        out.total += w;
        out.amp_cos += w * a;
        out.amp_sin += w * b;
        out.max = out.max.max(v);
    }
    out
}

/// Brownian increments over `steps` steps of size `dt`, generated at the
/// coarser step `dt·2^refinements` and refined by Brownian-bridge halving.
/// Runs that differ only in `refinements` (with `dt` scaled to match) share
/// the same coarse path.
fn brownian_increments<R: Rng>(rng: &mut R, steps: usize, dt: f64, refinements: u32) -> Vec<f64> {
    let factor = 1usize << refinements;
    let coarse_steps = steps / factor;
    let mut h = dt * factor as f64;
    let mut inc: Vec<f64> = (0..coarse_steps)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            h.sqrt() * z
        })
        .collect();
    for _ in 0..refinements {
        let sd = 0.5 * h.sqrt();
        let mut finer = Vec::with_capacity(inc.len() * 2);
        for &dw in &inc {
            let z: f64 = StandardNormal.sample(rng);
            let first = 0.5 * dw + sd * z;
            finer.push(first);
            finer.push(dw - first);
        }
        inc = finer;
        h *= 0.5;
    }
    inc
}

/// Causal error of a single wave by the phase-grid filter, averaged over
/// `mc.paths` simulated paths.
pub fn cmmse_causal_estimate(
    grid: &ToneGrid,
    snr: ChannelSnr,
    mc: &MonteCarloSpec,
) -> Result<MonteCarloEstimate> {
    cmmse_causal_estimate_refined(grid, snr, mc, 0)
}

/// As [`cmmse_causal_estimate`], with the Brownian path drawn at step
/// `mc.dt·2^refinements` and bridged down to `mc.dt`.
pub fn cmmse_causal_estimate_refined(
    grid: &ToneGrid,
    snr: ChannelSnr,
    mc: &MonteCarloSpec,
    refinements: u32,
) -> Result<MonteCarloEstimate> {
    if grid.len() != 1 {
        return Err(domain("the causal phase filter handles a single wave only"));
    }
    let q = snr.value();
    if q <= 0.0 {
        return Err(domain("causal estimate needs q > 0"));
    }
    let steps = mc.steps(grid.horizon())?;
    if refinements >= 20 || steps % (1usize << refinements) != 0 {
        return Err(domain("step count must be divisible by 2^refinements"));
    }
    let dt = mc.dt;
    let omega = grid.angular_frequency(0);
    let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..steps)
        .map(|k| {
            let ph = omega * (k as f64 * dt);
            (ph.cos(), ph.sin())
        })
        .unzip();
    let amplitude = (2.0 / grid.horizon()).sqrt();
    let alloc = SpectrumAllocation::equal(1)?;
    let sqrt_q = q.sqrt();

    let errors: Vec<f64> = (0..mc.paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(mc.seed, path);
            let signal = tone_path_with(grid, &alloc, steps, dt, &mut rng);
            let noise = brownian_increments(&mut rng, steps, dt, refinements);
            let mut post = PhaseGridPosterior::new(mc.theta_grid_size, amplitude, snr, dt);
            let mut err = 0.0;
            for k in 0..steps {
                let (c, s) = (cos_t[k], sin_t[k]);
                let x = signal.values[k];
                let e = x - post.signal_estimate(c, s);
                err += e * e;
                post.assimilate(c, s, sqrt_q * x * dt + noise[k])?;
            }
            Ok(err * dt)
        })
        .collect::<Result<_>>()?;
    Ok(MonteCarloEstimate::from_samples(&errors))
}
