//! The `verify` suite: every check yields a value and a tolerance, the report
//! lists them in a fixed order, and the run fails if any check fails.

use crate::config::RunConfig;
use crate::Failure;
use nbmmse::divergence::{default_d2_grid, truncation_radius};
use nbmmse::mmse::richardson_derivative;
use nbmmse::quadrature::{integrate, AdaptiveOptions};
use nbmmse::simkit::{
    cmmse_causal_estimate, divergence_log_bessel_oracle, ks_envelope_test, mmse_sum_oracle,
    mmse_sum_oracle_quadrature, sample_envelope,
};
use nbmmse::specfun::{rayleigh_log_pdf, rician_log_pdf, EnvelopeDensityParams};
use nbmmse::{
    check_bridge, cmmse_gaussian, cmmse_tone_sum, estimate_d2_at_zero, mmse_gaussian,
    mmse_tone_sum, ChannelSnr, DivergenceModel, MonteCarloSpec, QuadratureSpec, SpectrumAllocation,
    ToneGrid,
};
use rayon::prelude::*;
use serde::Serialize;

const DENSITY_SNRS: [f64; 6] = [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0];
const ERROR_SNRS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
const ERROR_WAVES: [usize; 4] = [1, 2, 7, 40];
const ORACLE_DRAWS: usize = 200_000;
const KS_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub check_name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            check_name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    /// Passes when `value ≥ tolerance`.
    fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            check_name: name.into(),
            value,
            tolerance,
            passed: value >= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    seed: u64,
    all_passed: bool,
    checks: &'a [Check],
}

type Outcome = Result<Vec<Check>, Failure>;

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

fn envelope_moment(
    q: f64,
    power: i32,
    log_pdf: &dyn Fn(f64) -> nbmmse::Result<f64>,
) -> Result<f64, Failure> {
    let mu = q.sqrt();
    let mut edges = vec![0.0];
    for off in [-10.0, -4.0, 0.0, 4.0, 10.0] {
        if mu + off > 0.0 {
            edges.push(mu + off);
        }
    }
    edges.push(truncation_radius(q));
    let opts = AdaptiveOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_subdivisions: 2000,
    };
    let i = integrate(
        |r| r.powi(power) * log_pdf(r).map(f64::exp).unwrap_or(f64::NAN),
        &edges,
        &opts,
    )?;
    Ok(i.value)
}

fn densities() -> Outcome {
    let mut mass = Vec::new();
    let mut second = Vec::new();
    for q in DENSITY_SNRS {
        let p = EnvelopeDensityParams::new(q)?;
        let rician = |r: f64| rician_log_pdf(r, &p);
        let rayleigh = |r: f64| rayleigh_log_pdf(r, &p);
        for f in [&rician as &dyn Fn(f64) -> nbmmse::Result<f64>, &rayleigh] {
            mass.push((envelope_moment(q, 0, f)? - 1.0).abs());
            second.push(((envelope_moment(q, 2, f)? - (2.0 + q)) / (2.0 + q)).abs());
        }
    }
    Ok(vec![
        Check::at_most("density_normalization", max_of(mass), 1e-10),
        Check::at_most("second_moment_matching", max_of(second), 1e-8),
    ])
}

fn divergence_signs(model: &dyn DivergenceModel) -> Outcome {
    let mut d = Vec::new();
    let mut excess = Vec::new();
    let mut slope = Vec::new();
    for q in DENSITY_SNRS {
        let v = model.divergence(q)?.value;
        d.push(v);
        excess.push(v - (0.5 * q).ln_1p());
        slope.push(model.derivative(q)?.value);
    }
    Ok(vec![
        Check::at_least("gibbs_nonnegativity", min_of(d), 0.0),
        Check::at_most("divergence_below_log_bound", max_of(excess), 0.0),
        Check::at_least("derivative_nonnegativity", min_of(slope), 0.0),
    ])
}

/// Largest `|D′ − finite difference|` relative to `max(1e-8, 1e-6·|D′|)` on a
/// log grid, so the tolerance is 1.
fn derivative_vs_difference(model: &dyn DivergenceModel) -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..=15 {
        let q = 10f64.powf(-2.0 + 5.0 * k as f64 / 15.0);
        let analytic = model.derivative(q)?.value;
        let h = 1e-4f64.min(0.25 * q);
        let fd = richardson_derivative(|s| Ok(model.divergence(s)?.value), q, h)?;
        worst = worst.max((analytic - fd).abs() / 1e-8f64.max(1e-6 * analytic.abs()));
    }
    Ok(vec![Check::at_most(
        "derivative_vs_difference_scaled",
        worst,
        1.0,
    )])
}

fn second_route(model: &dyn DivergenceModel, spec: &QuadratureSpec) -> Outcome {
    let mut worst: f64 = 0.0;
    for q in [1.0, 2.0, 10.0, 100.0] {
        let (oracle, _) = divergence_log_bessel_oracle(q, spec)?;
        worst = worst.max((model.divergence(q)?.value - oracle).abs());
    }
    Ok(vec![Check::at_most(
        "divergence_vs_log_bessel_route",
        worst,
        1e-9,
    )])
}

fn bridges(model: &dyn DivergenceModel) -> Outcome {
    let mut differential: f64 = 0.0;
    let mut integral: f64 = 0.0;
    for n in [1usize, 4, 7] {
        let alloc = SpectrumAllocation::equal(n)?;
        for q in [0.5, 1.0, 10.0, 100.0] {
            let r = check_bridge(&alloc, ChannelSnr::new(q)?, model)?;
            differential = differential.max(r.differential);
            integral = integral.max(r.integral);
        }
    }
    Ok(vec![
        Check::at_most("bridge_differential", differential, 1e-6),
        Check::at_most("bridge_integral", integral, 1e-6),
    ])
}

fn error_orderings(model: &dyn DivergenceModel) -> Outcome {
    let mut causal_excess = f64::NEG_INFINITY;
    let mut smooth_excess = f64::NEG_INFINITY;
    let mut ordering = f64::NEG_INFINITY;
    for n in ERROR_WAVES {
        let alloc = SpectrumAllocation::equal(n)?;
        for q in ERROR_SNRS {
            let snr = ChannelSnr::new(q)?;
            let c = cmmse_tone_sum(&alloc, snr, model)?.value;
            let m = mmse_tone_sum(&alloc, snr, model)?.value;
            causal_excess = causal_excess.max(c - cmmse_gaussian(&alloc, snr));
            smooth_excess = smooth_excess.max(m - mmse_gaussian(&alloc, snr));
            ordering = ordering.max(m - c).max(c - 1.0);
        }
    }
    Ok(vec![
        Check::at_most("gaussian_dominance_cmmse", causal_excess, 1e-12),
        Check::at_most("gaussian_dominance_mmse", smooth_excess, 1e-12),
        Check::at_most("mmse_le_cmmse_le_one", ordering, 1e-12),
    ])
}

fn smoothing_oracles(model: &dyn DivergenceModel, spec: &QuadratureSpec, seed: u64) -> Outcome {
    let mut quad: f64 = 0.0;
    let mut z: f64 = 0.0;
    let mc = MonteCarloSpec {
        paths: ORACLE_DRAWS,
        seed,
        ..MonteCarloSpec::default()
    };
    for n in [1usize, 7] {
        let alloc = SpectrumAllocation::equal(n)?;
        for q in [2.0, 100.0] {
            let snr = ChannelSnr::new(q)?;
            let closed = mmse_tone_sum(&alloc, snr, model)?.value;
            quad = quad.max((closed - mmse_sum_oracle_quadrature(&alloc, snr, spec)?.0).abs());
            let est = mmse_sum_oracle(&alloc, snr, &mc)?;
            z = z.max((closed - est.estimate).abs() / est.std_error);
        }
    }
    Ok(vec![
        Check::at_most("mmse_vs_quadrature_oracle", quad, 1e-6),
        Check::at_most("mmse_vs_monte_carlo_oracle_z", z, 4.0),
    ])
}

fn causal_oracle(model: &dyn DivergenceModel, q: f64, mc: &MonteCarloSpec) -> Outcome {
    let alloc = SpectrumAllocation::equal(1)?;
    let snr = ChannelSnr::new(q)?;
    if q == 0.0 {
        return Ok(vec![Check::at_most("cmmse_vs_causal_filter", 0.0, 0.0)]);
    }
    let target = cmmse_tone_sum(&alloc, snr, model)?.value;
    let est = cmmse_causal_estimate(&ToneGrid::unit(1)?, snr, mc)?;
    let tolerance = (3.0 * est.std_error).max(0.01 * target);
    Ok(vec![Check::at_most(
        "cmmse_vs_causal_filter",
        (est.estimate - target).abs(),
        tolerance,
    )])
}

fn curvature(spec: &QuadratureSpec) -> Outcome {
    let tight = QuadratureSpec {
        abs_tol: spec.abs_tol.min(1e-16),
        tail_mass_bound: spec.tail_mass_bound.min(1e-17),
        ..*spec
    };
    let c = estimate_d2_at_zero(&tight, &default_d2_grid())?;
    let coarse: Vec<f64> = default_d2_grid().into_iter().step_by(2).collect();
    let other = estimate_d2_at_zero(&tight, &coarse)?;
    Ok(vec![
        Check::at_most("d2_fit_residual", c.fit_residual, 1e-4),
        Check::at_most(
            "d2_grid_stability",
            (c.d2_at_zero - other.d2_at_zero).abs(),
            1e-4,
        ),
        Check::at_most("d2_at_zero_magnitude", c.d2_at_zero.abs(), 1e-4),
    ])
}

fn envelope_law(seed: u64) -> Outcome {
    let mut out = Vec::new();
    for (i, gamma) in [1.0, 10.0].into_iter().enumerate() {
        let samples = sample_envelope(gamma, KS_SAMPLES, seed.wrapping_add(i as u64))?;
        let ks = ks_envelope_test(gamma, &samples)?;
        out.push(Check::at_least(
            &format!("ks_envelope_gamma_{gamma}_p_value"),
            ks.p_value,
            1e-3,
        ));
    }
    Ok(out)
}

pub fn checks(config: &RunConfig) -> Result<Vec<Check>, Failure> {
    let model = config.model();
    let model = model.as_ref();
    let spec = &config.quadrature;
    let seed = config.mc.seed;
    let q = config.qs[0];
    let jobs: Vec<Box<dyn Fn() -> Outcome + Sync + '_>> = vec![
        Box::new(densities),
        Box::new(|| divergence_signs(model)),
        Box::new(|| derivative_vs_difference(model)),
        Box::new(|| second_route(model, spec)),
        Box::new(|| bridges(model)),
        Box::new(|| error_orderings(model)),
        Box::new(|| smoothing_oracles(model, spec, seed)),
        Box::new(|| causal_oracle(model, q, &config.mc)),
        Box::new(|| curvature(spec)),
        Box::new(|| envelope_law(seed)),
    ];
    let groups: Vec<Vec<Check>> = jobs.par_iter().map(|job| job()).collect::<Result<_, _>>()?;
    Ok(groups.into_iter().flatten().collect())
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let checks = checks(config)?;
    let all_passed = checks.iter().all(|c| c.passed);
    let report = Report {
        seed: config.mc.seed,
        all_passed,
        checks: &checks,
    };
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| Failure::Numerical(e.to_string()))?;
    text.push('\n');
    config.emit(&text)?;
    for c in checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "FAILED {}: {:e} against tolerance {:e}",
            c.check_name, c.value, c.tolerance
        );
    }
    if all_passed {
        Ok(())
    } else {
        let n = checks.iter().filter(|c| !c.passed).count();
        Err(Failure::Verification(format!(
            "{n} of {} checks failed",
            checks.len()
        )))
    }
}
