use super::rng::path_rng;
use super::{MonteCarloSpec, ToneGrid};
use crate::error::{domain, Result};
use crate::mmse::{ChannelSnr, SpectrumAllocation};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    ToneSum,
    GaussianSum,
}

/// Random quantities behind a sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub enum Latent {
    /// Phases `θ_i` in `[0, 2π)`.
    Phases(Vec<f64>),
    /// In-phase and quadrature coefficients `a_ci`, `a_si`.
    Coefficients { cos: Vec<f64>, sin: Vec<f64> },
}

/// Signal samples at `t_k = k·dt`, `k = 0..steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub kind: PathKind,
    pub latent: Latent,
}

impl SampledPath {
    /// Riemann sum `Σ ξ(t_k)²·dt`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.dt
    }
}

/// Increments `Δη_k = √q·ξ(t_k)·dt + ΔW_k` of the channel output.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPath {
    pub dt: f64,
    pub increments: Vec<f64>,
}

pub(crate) fn tone_path_with<R: Rng>(
    grid: &ToneGrid,
    alloc: &SpectrumAllocation,
    steps: usize,
    dt: f64,
    rng: &mut R,
) -> SampledPath {
    let phases: Vec<f64> = (0..grid.len()).map(|_| TAU * rng.random::<f64>()).collect();
    let scale = (2.0 / grid.horizon()).sqrt();
    let mut values = vec![0.0; steps];
    for (i, (&alpha, &theta)) in alloc.alphas().iter().zip(&phases).enumerate() {
        let omega = grid.angular_frequency(i);
        let amp = scale * alpha;
        for (k, v) in values.iter_mut().enumerate() {
            *v += amp * (omega * (k as f64 * dt) + theta).cos();
        }
    }
    SampledPath {
        dt,
        values,
        kind: PathKind::ToneSum,
        latent: Latent::Phases(phases),
    }
}

/// Random-phase tone sum `Σ √(2/T)·α_i·cos(ω_i t + θ_i)` for path `path_index`.
pub fn sample_tone_path(
    grid: &ToneGrid,
    alloc: &SpectrumAllocation,
    mc: &MonteCarloSpec,
    path_index: u64,
) -> Result<SampledPath> {
    if grid.len() != alloc.len() {
        return Err(domain(format!(
            "tone grid has {} waves but allocation has {}",
            grid.len(),
            alloc.len()
        )));
    }
    let steps = mc.steps(grid.horizon())?;
    let mut rng = path_rng(mc.seed, path_index);
    Ok(tone_path_with(grid, alloc, steps, mc.dt, &mut rng))
}

/// Gaussian tone sum `Σ √(1/T)·(a_ci cos ω_i t + a_si sin ω_i t)` with
/// independent `a ~ N(0, 1/N)`; same covariance as the equal-energy tone sum.
pub fn sample_gaussian_path(
    grid: &ToneGrid,
    mc: &MonteCarloSpec,
    path_index: u64,
) -> Result<SampledPath> {
    let steps = mc.steps(grid.horizon())?;
    let n = grid.len();
    let coeff = Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("positive variance");
    let mut rng = path_rng(mc.seed, path_index);
    let cos: Vec<f64> = (0..n).map(|_| coeff.sample(&mut rng)).collect();
    let sin: Vec<f64> = (0..n).map(|_| coeff.sample(&mut rng)).collect();
    let scale = (1.0 / grid.horizon()).sqrt();
    let mut values = vec![0.0; steps];
    for i in 0..n {
        let omega = grid.angular_frequency(i);
        for (k, v) in values.iter_mut().enumerate() {
            let phase = omega * (k as f64 * mc.dt);
            *v += scale * (cos[i] * phase.cos() + sin[i] * phase.sin());
        }
    }
    Ok(SampledPath {
        dt: mc.dt,
        values,
        kind: PathKind::GaussianSum,
        latent: Latent::Coefficients { cos, sin },
    })
}

/// Euler increments of the channel output for `signal`, drawing the Brownian
/// increments from `rng`.
pub fn observe<R: Rng>(signal: &SampledPath, snr: ChannelSnr, rng: &mut R) -> ObservationPath {
    let dt = signal.dt;
    let drift = snr.value().sqrt() * dt;
    let sd = dt.sqrt();
    let increments = signal
        .values
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(rng);
            drift * x + sd * z
        })
        .collect();
    ObservationPath { dt, increments }
}
