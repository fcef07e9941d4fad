//! Causal and non-causal minimum mean-square errors for a normalized sum of
//! random-phase waves and for its Gaussian counterpart with the same
//! covariance.
//!
//! Errors are time-integrated over the observation interval. With unit
//! signal energy both errors lie in `[0, 1]` and tend to 1 as the SNR goes
//! to 0 or as the number of equal-energy waves grows.

use crate::divergence::{per_wave_sum, AsymptoticCoefficients, DivergenceModel};
use crate::error::{domain, Error, Result};
use crate::quadrature::{self, AdaptiveOptions};
use std::cell::RefCell;

/// Tolerance on `Σ α_i² = 1`.
pub const ENERGY_TOLERANCE: f64 = 1e-12;

/// Amplitudes `α_1..α_N` of the waves; the energies `α_i²` sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumAllocation {
    alphas: Vec<f64>,
    energies: Vec<f64>,
}

impl SpectrumAllocation {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(domain("allocation needs at least one wave"));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(domain(format!(
                "amplitudes must be finite and positive, got {a}"
            )));
        }
        let energies: Vec<f64> = alphas.iter().map(|a| a * a).collect();
        let total: f64 = energies.iter().sum();
        if (total - 1.0).abs() > ENERGY_TOLERANCE {
            return Err(domain(format!("wave energies sum to {total}, expected 1")));
        }
        Ok(Self { alphas, energies })
    }

    /// `N` waves with `α_i² = 1/N` exactly.
    pub fn equal(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("allocation needs at least one wave"));
        }
        let energy = 1.0 / n as f64;
        Ok(Self {
            alphas: vec![energy.sqrt(); n],
            energies: vec![energy; n],
        })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
}

/// Channel SNR `q ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ChannelSnr(f64);

impl ChannelSnr {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q < 0.0 {
            return Err(domain(format!("SNR must be finite and >= 0, got {q}")));
        }
        Ok(Self(q))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// One error value with its propagated quadrature uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorComponent {
    pub value: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    pub cmmse: f64,
    pub mmse: f64,
    pub divergence_error_bound: f64,
}

/// Causal error of the Gaussian signal, `(2/q)·Σ ln(1 + α_i² q/2)`.
pub fn cmmse_gaussian(alloc: &SpectrumAllocation, snr: ChannelSnr) -> f64 {
    let q = snr.value();
    if q == 0.0 {
        return 1.0;
    }
    let total: f64 = alloc.energies().iter().map(|e| (0.5 * e * q).ln_1p()).sum();
    2.0 * total / q
}

/// Non-causal error of the Gaussian signal, `Σ α_i²/(1 + α_i² q/2)`.
pub fn mmse_gaussian(alloc: &SpectrumAllocation, snr: ChannelSnr) -> f64 {
    let q = snr.value();
    alloc
        .energies()
        .iter()
        .map(|e| e / (1.0 + 0.5 * e * q))
        .sum()
}

/// Causal error of the random-phase tone sum: the Gaussian value minus
/// `(2/q)·D_N(q)`.
pub fn cmmse_tone_sum<M: DivergenceModel + ?Sized>(
    alloc: &SpectrumAllocation,
    snr: ChannelSnr,
    model: &M,
) -> Result<ErrorComponent> {
    let q = snr.value();
    if q == 0.0 {
        return Ok(ErrorComponent {
            value: 1.0,
            error_bound: 0.0,
        });
    }
    let (d_n, err) = per_wave_sum(alloc, q, |g| model.divergence(g), |_| 1.0)?;
    Ok(ErrorComponent {
        value: cmmse_gaussian(alloc, snr) - 2.0 * d_n / q,
        error_bound: 2.0 * err / q,
    })
}

/// Non-causal error of the random-phase tone sum: the Gaussian value minus
/// `2·dD_N/dq = 2·Σ α_i²·D'(α_i² q)`.
pub fn mmse_tone_sum<M: DivergenceModel + ?Sized>(
    alloc: &SpectrumAllocation,
    snr: ChannelSnr,
    model: &M,
) -> Result<ErrorComponent> {
    let q = snr.value();
    if q == 0.0 {
        return Ok(ErrorComponent {
            value: 1.0,
            error_bound: 0.0,
        });
    }
    let (dd_n, err) = per_wave_sum(alloc, q, |g| model.derivative(g), |e| e)?;
    Ok(ErrorComponent {
        value: mmse_gaussian(alloc, snr) - 2.0 * dd_n,
        error_bound: 2.0 * err,
    })
}

/// Both tone-sum errors at one SNR.
pub fn tone_error_pair<M: DivergenceModel + ?Sized>(
    alloc: &SpectrumAllocation,
    snr: ChannelSnr,
    model: &M,
) -> Result<ErrorPair> {
    let c = cmmse_tone_sum(alloc, snr, model)?;
    let m = mmse_tone_sum(alloc, snr, model)?;
    Ok(ErrorPair {
        cmmse: c.value,
        mmse: m.value,
        divergence_error_bound: c.error_bound.max(m.error_bound),
    })
}

/// Large-`N` forms `1 − (¼ + d2)·q/N` and `1 − (½ + 2·d2)·q/N`, clamped to
/// `[0, 1]`.
pub fn asymptotic_errors(
    snr: ChannelSnr,
    n: usize,
    coeffs: &AsymptoticCoefficients,
) -> Result<ErrorPair> {
    if n == 0 {
        return Err(domain("wave count must be >= 1"));
    }
    let load = snr.value() / n as f64;
    let d2 = coeffs.d2_at_zero;
    Ok(ErrorPair {
        cmmse: (1.0 - (0.25 + d2) * load).clamp(0.0, 1.0),
        mmse: (1.0 - (0.5 + 2.0 * d2) * load).clamp(0.0, 1.0),
        divergence_error_bound: 0.0,
    })
}

/// Residuals of the two forms of the causal/non-causal bridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeResiduals {
    /// `|d/dq[q·CMMSE(q)] − MMSE(q)|`.
    pub differential: f64,
    /// `|CMMSE(q) − (1/q)·∫₀^q MMSE(s) ds|`.
    pub integral: f64,
}

impl BridgeResiduals {
    pub fn max(&self) -> f64 {
        self.differential.max(self.integral)
    }
}

/// Finite-difference step for the differential bridge.
pub fn bridge_step(q: f64) -> f64 {
    let h = (1e-4f64).max(1e-4 * q);
    if h >= 0.5 * q {
        0.25 * q
    } else {
        h
    }
}

/// Central difference of `f` at `x`, with one Richardson level.
pub fn richardson_derivative<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    x: f64,
    h: f64,
) -> Result<f64> {
    let coarse = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let half = 0.5 * h;
    let fine = (f(x + half)? - f(x - half)?) / h;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Check `d/dq[q·CMMSE] = MMSE` and `CMMSE(q) = (1/q)∫₀^q MMSE(s) ds` for the
/// tone sum.
pub fn check_bridge<M: DivergenceModel + ?Sized>(
    alloc: &SpectrumAllocation,
    snr: ChannelSnr,
    model: &M,
) -> Result<BridgeResiduals> {
    let q = snr.value();
    if q <= 0.0 {
        return Err(domain("bridge check needs q > 0"));
    }
    let scaled_cmmse = |s: f64| -> Result<f64> {
        Ok(s * cmmse_tone_sum(alloc, ChannelSnr::new(s)?, model)?.value)
    };
    let slope = richardson_derivative(scaled_cmmse, q, bridge_step(q))?;
    let mmse = mmse_tone_sum(alloc, snr, model)?.value;
    let cmmse = cmmse_tone_sum(alloc, snr, model)?.value;

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64| match ChannelSnr::new(s).and_then(|s| mmse_tone_sum(alloc, s, model)) {
        Ok(m) => m.value,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let edges = [0.0, 0.125 * q, 0.25 * q, 0.5 * q, q];
    let opts = AdaptiveOptions {
        abs_tol: 1e-11 * q,
        rel_tol: 1e-11,
        max_subdivisions: 400,
    };
    let integral = quadrature::integrate(integrand, &edges, &opts);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let average = integral?.value / q;

    Ok(BridgeResiduals {
        differential: (slope - mmse).abs(),
        integral: (cmmse - average).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{divergence_derivative, divergence_single, QuadratureSpec};

    fn snr(q: f64) -> ChannelSnr {
        ChannelSnr::new(q).unwrap()
    }

    #[test]
    fn allocation_validation() {
        assert!(SpectrumAllocation::new(vec![]).is_err());
        assert!(SpectrumAllocation::new(vec![0.5, 0.5]).is_err());
        assert!(SpectrumAllocation::new(vec![1.0, 0.0]).is_err());
        assert!(SpectrumAllocation::new(vec![-1.0]).is_err());
        assert!(SpectrumAllocation::equal(0).is_err());
        let a = SpectrumAllocation::new(vec![0.6, 0.8]).unwrap();
        assert_eq!(a.len(), 2);
        let e = SpectrumAllocation::equal(7).unwrap();
        assert!(e.energies().iter().all(|&x| x == 1.0 / 7.0));
        assert!(ChannelSnr::new(-1.0).is_err());
        assert!(ChannelSnr::new(f64::INFINITY).is_err());
    }

    #[test]
    fn gaussian_closed_forms() {
        let one = SpectrumAllocation::equal(1).unwrap();
        assert!((cmmse_gaussian(&one, snr(100.0)) - 0.02 * 51f64.ln()).abs() < 1e-16);
        let fifty = SpectrumAllocation::equal(50).unwrap();
        assert!((cmmse_gaussian(&fifty, snr(100.0)) - std::f64::consts::LN_2).abs() < 1e-14);
        assert!((mmse_gaussian(&fifty, snr(100.0)) - 0.5).abs() < 1e-15);
        assert_eq!(cmmse_gaussian(&fifty, snr(0.0)), 1.0);
        assert!((mmse_gaussian(&fifty, snr(0.0)) - 1.0).abs() < 1e-15);
        let half = SpectrumAllocation::new(vec![0.5f64.sqrt(), 0.5f64.sqrt()]).unwrap();
        assert!((mmse_gaussian(&half, snr(4.0)) - 0.5).abs() < 1e-15);
        assert!((cmmse_gaussian(&one, snr(1e-12)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tone_errors_at_zero_snr_are_one() {
        let spec = QuadratureSpec::default();
        let a = SpectrumAllocation::equal(3).unwrap();
        assert_eq!(cmmse_tone_sum(&a, snr(0.0), &spec).unwrap().value, 1.0);
        assert_eq!(mmse_tone_sum(&a, snr(0.0), &spec).unwrap().value, 1.0);
        assert!((cmmse_tone_sum(&a, snr(1e-6), &spec).unwrap().value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_wave_composition() {
        let spec = QuadratureSpec::default();
        let one = SpectrumAllocation::equal(1).unwrap();
        let d = divergence_single(100.0, &spec).unwrap().value;
        let c = cmmse_tone_sum(&one, snr(100.0), &spec).unwrap();
        assert!((c.value - (0.02 * 51f64.ln() - 0.02 * d)).abs() < 1e-15);
        let dp = divergence_derivative(2.0, &spec).unwrap().value;
        let m = mmse_tone_sum(&one, snr(2.0), &spec).unwrap();
        assert!((m.value - (0.5 - 2.0 * dp)).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_forms() {
        let coeffs = AsymptoticCoefficients {
            d2_at_zero: 0.0,
            fit_residual: 0.0,
            grid: vec![],
            scaled_values: vec![],
        };
        let p = asymptotic_errors(snr(1.0), 100, &coeffs).unwrap();
        assert!((p.cmmse - 0.9975).abs() < 1e-15);
        assert!((p.mmse - 0.995).abs() < 1e-15);
        let p = asymptotic_errors(snr(0.0), 5, &coeffs).unwrap();
        assert_eq!((p.cmmse, p.mmse), (1.0, 1.0));
        let p = asymptotic_errors(snr(1000.0), 1, &coeffs).unwrap();
        assert_eq!((p.cmmse, p.mmse), (0.0, 0.0));
        assert!(asymptotic_errors(snr(1.0), 0, &coeffs).is_err());
    }

    #[test]
    fn richardson_on_gaussian_identity() {
        // d/dq [2N ln(1 + q/2N)] = 1/(1 + q/2N)
        for (n, q) in [(1usize, 0.5), (4, 10.0), (40, 100.0)] {
            let a = SpectrumAllocation::equal(n).unwrap();
            let slope = richardson_derivative(
                |s| Ok(s * cmmse_gaussian(&a, ChannelSnr::new(s)?)),
                q,
                bridge_step(q),
            )
            .unwrap();
            assert!(
                (slope - mmse_gaussian(&a, snr(q))).abs() < 1e-8,
                "n={n} q={q}"
            );
        }
    }

    #[test]
    fn bridge_rejects_zero_snr() {
        let a = SpectrumAllocation::equal(1).unwrap();
        assert!(check_bridge(&a, snr(0.0), &QuadratureSpec::default()).is_err());
    }
}
