//! Non-causal error oracle for random-phase waves.
//!
//! Projecting the whole observation onto a wave's quadrature pair gives
//! `v = √γ·e^{iθ} + n`, with `n` complex normal of unit-variance parts and
//! `γ = α²q`. The phase posterior given `v` is von Mises with concentration
//! `√γ·|v|`, so the conditional-mean error of `e^{iθ}` is
//! `1 − (I1/I0)(√γ·|v|)²`. Averaging over `|v|`, which is Rician, gives the
//! per-wave error `m(γ)`. Distinct integer frequencies make the projections
//! independent across waves, so the sum error is `Σ α_i²·m(α_i² q)`.

use super::rng::path_rng;
use super::{MonteCarloEstimate, MonteCarloSpec};
use crate::divergence::{truncation_radius, QuadratureSpec};
use crate::error::{domain, Result};
use crate::mmse::{ChannelSnr, SpectrumAllocation};
use crate::quadrature::{self, gauss_kronrod_15, AdaptiveOptions};
use crate::specfun::{i0e, ratio_i1_i0, rician_log_pdf_unchecked, EnvelopeDensityParams};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::TAU;

const BATCH: usize = 4096;

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(domain(format!(
            "per-wave SNR must be finite and >= 0, got {gamma}"
        )));
    }
    Ok(())
}

/// `|√γ·e^{iθ} + n|` for one draw.
fn envelope_draw<R: Rng>(sqrt_gamma: f64, rng: &mut R) -> f64 {
    let theta = TAU * rng.random::<f64>();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    (sqrt_gamma * theta.cos() + re).hypot(sqrt_gamma * theta.sin() + im)
}

/// Batched draws: batch `b` uses stream `stream_base + b`, and the per-batch
/// totals are added in batch order.
fn batched_moments<F>(count: usize, seed: u64, stream_base: u64, draw: F) -> MonteCarloEstimate
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    let batches = count.div_ceil(BATCH);
    let parts: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = path_rng(seed, stream_base + b as u64);
            let n = BATCH.min(count - b * BATCH);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let x = draw(&mut rng);
                sum += x;
                sum_sq += x * x;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = parts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(s, s2)| (a + s, b + s2));
    MonteCarloEstimate::from_moments(count, sum, sum_sq)
}

/// Monte Carlo estimate of the per-wave non-causal error `m(γ)` from
/// `mc.paths` draws.
pub fn mmse_tone_oracle(gamma: f64, mc: &MonteCarloSpec) -> Result<MonteCarloEstimate> {
    check_gamma(gamma)?;
    mc.validate()?;
    Ok(tone_oracle_streams(gamma, mc, 0))
}

fn tone_oracle_streams(gamma: f64, mc: &MonteCarloSpec, stream_base: u64) -> MonteCarloEstimate {
    let sg = gamma.sqrt();
    batched_moments(mc.paths, mc.seed, stream_base, |rng| {
        let r = envelope_draw(sg, rng);
        let rho = ratio_i1_i0(sg * r);
        1.0 - rho * rho
    })
}

/// `∫ f(r; γ)·h(r) dr` over the Rician envelope law, with its error estimate.
fn rician_expectation<H: Fn(f64) -> f64>(
    p: &EnvelopeDensityParams,
    spec: &QuadratureSpec,
    h: H,
) -> Result<(f64, f64)> {
    let sg = p.sqrt_q();
    let radius = truncation_radius(p.q());
    let mut edges = vec![0.0];
    for off in [-8.0, -3.0, 0.0, 3.0, 8.0] {
        let x = sg + off;
        if x > *edges.last().unwrap() && x < radius {
            edges.push(x);
        }
    }
    edges.push(radius);
    let opts = AdaptiveOptions {
        abs_tol: spec.abs_tol,
        rel_tol: spec.rel_tol,
        max_subdivisions: spec.max_subdivisions,
    };
    let i = quadrature::integrate(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            let lf = rician_log_pdf_unchecked(r, p);
            if lf < -745.0 {
                return 0.0;
            }
            lf.exp() * h(r)
        },
        &edges,
        &opts,
    )?;
    Ok((i.value, i.error_estimate))
}

/// `m(γ) = 1 − ∫ f(r; γ)·(I1/I0)(√γ r)² dr` by adaptive quadrature; returns
/// the value and its error estimate.
pub fn mmse_tone_oracle_quadrature(gamma: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    spec.validate()?;
    if gamma == 0.0 {
        return Ok((1.0, 0.0));
    }
    let p = EnvelopeDensityParams::new(gamma)?;
    let sg = p.sqrt_q();
    let (captured, err) = rician_expectation(&p, spec, |r| {
        let rho = ratio_i1_i0(sg * r);
        rho * rho
    })?;
    Ok((1.0 - captured, err))
}

/// The divergence by a second route, `D(q) = ln(1 + q/2) − q + E[ln I0(√q·r)]`
/// with `r` Rician, which never forms the log-density ratio. Returns the value
/// and its error estimate.
pub fn divergence_log_bessel_oracle(q: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    check_gamma(q)?;
    spec.validate()?;
    if q == 0.0 {
        return Ok((0.0, 0.0));
    }
    let p = EnvelopeDensityParams::new(q)?;
    let sq = p.sqrt_q();
    let (log_i0, err) = rician_expectation(&p, spec, |r| {
        let x = sq * r;
        i0e(x).ln() + x
    })?;
    // The integral is of order q while D can be tiny, so its error carries
    // over in absolute terms.
    Ok(((0.5 * q).ln_1p() - q + log_i0, err))
}

/// Monte Carlo estimate of `Σ α_i²·m(α_i² q)`; wave `i` draws from its own
/// block of streams.
pub fn mmse_sum_oracle(
    alloc: &SpectrumAllocation,
    snr: ChannelSnr,
    mc: &MonteCarloSpec,
) -> Result<MonteCarloEstimate> {
    mc.validate()?;
    let q = snr.value();
    let mut estimate = 0.0;
    let mut var = 0.0;
    for (i, &e) in alloc.energies().iter().enumerate() {
        let m = tone_oracle_streams(e * q, mc, (i as u64) << 32);
        estimate += e * m.estimate;
        var += e * e * m.std_error * m.std_error;
    }
    Ok(MonteCarloEstimate {
        estimate,
        std_error: var.sqrt(),
    })
}

/// Deterministic counterpart of [`mmse_sum_oracle`]; returns the value and
/// the summed quadrature error estimate.
pub fn mmse_sum_oracle_quadrature(
    alloc: &SpectrumAllocation,
    snr: ChannelSnr,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let q = snr.value();
    let mut value = 0.0;
    let mut error = 0.0;
    for &e in alloc.energies() {
        let (m, err) = mmse_tone_oracle_quadrature(e * q, spec)?;
        value += e * m;
        error += e * err;
    }
    Ok((value, error))
}

/// `count` envelope samples `|√γ·e^{iθ} + n|`.
pub fn sample_envelope(gamma: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let sg = gamma.sqrt();
    let batches = count.div_ceil(BATCH);
    let parts: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = path_rng(seed, b as u64);
            let n = BATCH.min(count - b * BATCH);
            (0..n).map(|_| envelope_draw(sg, &mut rng)).collect()
        })
        .collect();
    Ok(parts.concat())
}

/// Rician CDF at each point of the ascending slice `sorted`, accumulated
/// panel by panel from 0.
pub fn rician_cdf_at_sorted(gamma: f64, sorted: &[f64]) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let p = EnvelopeDensityParams::new(gamma)?;
    let pdf = |r: f64| {
        if r <= 0.0 {
            0.0
        } else {
            rician_log_pdf_unchecked(r, &p).exp()
        }
    };
    let mut cdf = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &x in sorted {
        if !(x >= prev) {
            return Err(domain("CDF points must be ascending and non-negative"));
        }
        // Gaps wider than a quarter unit are split so each GK15 panel stays
        // well inside its exactness range.
        let pieces = ((x - prev) / 0.25).ceil().max(1.0) as usize;
        let h = (x - prev) / pieces as f64;
        for k in 0..pieces {
            let a = prev + k as f64 * h;
            let b = if k + 1 == pieces { x } else { a + h };
            if b > a {
                acc += gauss_kronrod_15(&pdf, a, b).0;
            }
        }
        cdf.push(acc.min(1.0));
        prev = x;
    }
    Ok(cdf)
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `samples` against the Rician law with parameter `gamma`.
pub fn ks_envelope_test(gamma: f64, samples: &[f64]) -> Result<KsOutcome> {
    if samples.is_empty() {
        return Err(domain("KS test needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cdf = rician_cdf_at_sorted(gamma, &sorted)?;
    let n = sorted.len() as f64;
    let statistic = cdf
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).max((i as f64 + 1.0) / n - f))
        .fold(0.0, f64::max);
    Ok(KsOutcome {
        statistic,
        p_value: kolmogorov_survival((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * statistic),
    })
}

/// `P(K > x)` for the Kolmogorov distribution.
fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(paths: usize) -> MonteCarloSpec {
        MonteCarloSpec {
            paths,
            dt: 1.0 / 1024.0,
            theta_grid_size: 16,
            seed: 42,
        }
    }

    // mpmath quadrature of 1 − E[(I1/I0)(√γ r)²].
    const M_REF: &[(f64, f64)] = &[
        (0.1, 0.952_331_466_561_348_934_540_465_7),
        (1.0, 0.654_851_196_936_981_101_191_332_6),
        (2.0, 0.467_104_112_420_056_475_279_119_8),
        (10.0, 0.106_988_407_374_975_950_696_203_6),
        (100.0, 0.010_051_308_803_205_900_511_774_25),
        (1000.0, 0.001_000_501_255_535_103_707_196_463),
    ];

    #[test]
    fn log_bessel_route_matches_reference_divergence() {
        let spec = QuadratureSpec::default();
        for (q, want) in [
            (1.0, 0.001989589200950376343011465),
            (2.0, 0.01324429311778199915618324),
            (100.0, 1.212834219865576641489955),
            (1000.0, 2.344040241810170830486474),
        ] {
            let (d, err) = divergence_log_bessel_oracle(q, &spec).unwrap();
            assert!(
                (d - want).abs() < 1e-12 * q.max(1.0) + err,
                "q={q}: {d} vs {want}"
            );
        }
        assert_eq!(divergence_log_bessel_oracle(0.0, &spec).unwrap().0, 0.0);
    }

    #[test]
    fn quadrature_oracle_matches_reference() {
        let spec = QuadratureSpec::default();
        for &(g, want) in M_REF {
            let (got, _) = mmse_tone_oracle_quadrature(g, &spec).unwrap();
            assert!((got - want).abs() < 1e-12, "gamma={g}: {got} vs {want}");
        }
        assert_eq!(mmse_tone_oracle_quadrature(0.0, &spec).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn monte_carlo_oracle_matches_quadrature() {
        let spec = QuadratureSpec::default();
        for g in [0.5, 2.0, 20.0] {
            let e = mmse_tone_oracle(g, &mc(200_000)).unwrap();
            let (want, _) = mmse_tone_oracle_quadrature(g, &spec).unwrap();
            assert!(
                (e.estimate - want).abs() < 4.0 * e.std_error,
                "gamma={g}: {e:?} vs {want}"
            );
        }
        let zero = mmse_tone_oracle(0.0, &mc(1000)).unwrap();
        assert_eq!(zero.estimate, 1.0);
    }

    #[test]
    fn large_snr_error_is_small_and_decreasing() {
        let spec = QuadratureSpec::default();
        let mut prev = 1.0;
        for g in [1e2, 1e3, 1e4, 1e5] {
            let (m, _) = mmse_tone_oracle_quadrature(g, &spec).unwrap();
            assert!(m < prev);
            prev = m;
        }
        let (m4, _) = mmse_tone_oracle_quadrature(1e4, &spec).unwrap();
        assert!(m4 < 0.01);
        let e = mmse_tone_oracle(1e4, &mc(20_000)).unwrap();
        assert!(e.estimate < 0.01);
    }

    #[test]
    fn sum_oracle_reduces_to_single_wave() {
        let one = SpectrumAllocation::equal(1).unwrap();
        let snr = ChannelSnr::new(3.0).unwrap();
        let a = mmse_sum_oracle(&one, snr, &mc(10_000)).unwrap();
        let b = mmse_tone_oracle(3.0, &mc(10_000)).unwrap();
        assert_eq!(a, b);
        let zero = mmse_sum_oracle(
            &SpectrumAllocation::equal(4).unwrap(),
            ChannelSnr::new(0.0).unwrap(),
            &mc(100),
        )
        .unwrap();
        assert!((zero.estimate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_samples_follow_rician_law() {
        for g in [1.0, 10.0] {
            let samples = sample_envelope(g, 100_000, 42).unwrap();
            let ks = ks_envelope_test(g, &samples).unwrap();
            assert!(ks.p_value > 1e-3, "gamma={g}: {ks:?}");
        }
        // A Rayleigh sample under the Rician hypothesis must be rejected.
        let wrong = sample_envelope(0.0, 100_000, 42).unwrap();
        assert!(ks_envelope_test(10.0, &wrong).unwrap().p_value < 1e-3);
    }

    #[test]
    fn rician_cdf_reaches_one() {
        let pts: Vec<f64> = (1..=60).map(|i| i as f64 * 0.5).collect();
        let cdf = rician_cdf_at_sorted(10.0, &pts).unwrap();
        assert!((cdf.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        assert!(rician_cdf_at_sorted(1.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Tabulated: P(K > 1.3581) ≈ 0.05, P(K > 1.9495) ≈ 0.001.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.9495) - 0.001).abs() < 1e-5);
    }
}
