//! The single-wave divergence `D(q) = ∫ f ln(f/g) dr` between the Rician
//! envelope law and its covariance-matched Rayleigh law, its derivative in
//! `q`, the multi-wave sum, and the small-SNR curvature coefficient.

use crate::error::{domain, Error, Result};
use crate::mmse::SpectrumAllocation;
use crate::quadrature::{self, AdaptiveOptions};
use crate::specfun::{
    i0e, ratio_i1_i0, rayleigh_log_pdf_unchecked, rician_log_pdf_unchecked, EnvelopeDensityParams,
};
use rayon::prelude::*;

/// Below this SNR `D` and `dD/dq` are taken from their power series in `q`.
pub const SERIES_SNR_LIMIT: f64 = 1e-3;

/// Grids whose smallest point is below this need `abs_tol ≤ 1e-16`.
pub const D2_GRID_FLOOR: f64 = 1e-4;

/// Accepted spread between the two extrapolations in [`estimate_d2_at_zero`].
pub const D2_FIT_TOLERANCE: f64 = 1e-4;

/// Coefficients of `q^4 .. q^10` in the expansion of `D(q)` about `q = 0`.
/// Lower orders vanish identically. Derived by expanding `ln I0` and taking
/// Rician moments `E r^{2k} = 2^k k! L_k(-q/2)`; the test suite re-derives
/// them in exact rational arithmetic.
const SMALL_SNR_SERIES: [(i32, f64); 7] = [
    (4, 1.0 / 128.0),
    (5, -1.0 / 64.0),
    (6, 121.0 / 4608.0),
    (7, -73.0 / 1536.0),
    (8, 9713.0 / 98304.0),
    (9, -157547.0 / 663552.0),
    (10, 9612203.0 / 14745600.0),
];

// First omitted coefficient (q^11), used as the series error bound.
const SMALL_SNR_SERIES_NEXT: f64 = 5945603.0 / 2949120.0;

/// Numerical controls for the envelope-domain integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Largest admissible mass of the integrand beyond the truncation radius.
    pub tail_mass_bound: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_subdivisions: 4000,
            tail_mass_bound: 1e-15,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.rel_tol) || !in_unit(self.abs_tol) {
            return Err(domain(format!(
                "tolerances must lie in (0, 1): rel_tol={}, abs_tol={}",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(domain("max_subdivisions must be >= 1"));
        }
        // Slack so decimal pairs such as 1e-17 and 1e-16 pass despite rounding.
        if !(self.tail_mass_bound > 0.0
            && self.tail_mass_bound <= 0.1 * self.abs_tol * (1.0 + 1e-9))
        {
            return Err(domain(format!(
                "tail_mass_bound must be positive and <= abs_tol/10, got {}",
                self.tail_mass_bound
            )));
        }
        Ok(())
    }

    fn adaptive(&self) -> AdaptiveOptions {
        AdaptiveOptions {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

/// A divergence value (or its `q`-derivative) in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Upper limit `R` of the truncated integral `∫₀^R`.
    pub truncation_radius: f64,
}

/// Small-SNR curvature of the divergence: `D(q) = ½·d2_at_zero·q² + o(q²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCoefficients {
    pub d2_at_zero: f64,
    pub fit_residual: f64,
    /// SNR sample points, in the order they were given.
    pub grid: Vec<f64>,
    /// `D(q)/q²` at each grid point.
    pub scaled_values: Vec<f64>,
}

/// Source of `D(q)` and `dD/dq` for the error formulas.
///
/// [`QuadratureSpec`] is the real implementation; other implementors exist to
/// perturb the divergence in negative-control runs.
pub trait DivergenceModel: Sync {
    fn divergence(&self, q: f64) -> Result<DivergenceResult>;
    fn derivative(&self, q: f64) -> Result<DivergenceResult>;
}

impl DivergenceModel for QuadratureSpec {
    fn divergence(&self, q: f64) -> Result<DivergenceResult> {
        divergence_single(q, self)
    }

    fn derivative(&self, q: f64) -> Result<DivergenceResult> {
        divergence_derivative(q, self)
    }
}

/// Scales `D` by `1 + relative_bias` while leaving `dD/dq` untouched, which
/// breaks every identity tying the two together.
#[derive(Debug, Clone, Copy)]
pub struct BiasedDivergence {
    pub spec: QuadratureSpec,
    pub relative_bias: f64,
}

impl DivergenceModel for BiasedDivergence {
    fn divergence(&self, q: f64) -> Result<DivergenceResult> {
        let mut d = divergence_single(q, &self.spec)?;
        d.value *= 1.0 + self.relative_bias;
        Ok(d)
    }

    fn derivative(&self, q: f64) -> Result<DivergenceResult> {
        divergence_derivative(q, &self.spec)
    }
}

/// Truncation radius covering both the Rician bulk near `√q` and the Rayleigh
/// scale `√(1 + q/2)`.
pub fn truncation_radius(q: f64) -> f64 {
    q.sqrt() + 12.0 + 12.0 * (1.0 + 0.5 * q).sqrt()
}

fn check_snr(q: f64) -> Result<()> {
    if !q.is_finite() || q < 0.0 {
        return Err(domain(format!("SNR must be finite and >= 0, got {q}")));
    }
    Ok(())
}

fn series_value(q: f64) -> DivergenceResult {
    let value = SMALL_SNR_SERIES
        .iter()
        .rev()
        .map(|&(m, c)| c * q.powi(m))
        .sum();
    DivergenceResult {
        value,
        error_estimate: SMALL_SNR_SERIES_NEXT * q.powi(11),
        truncation_radius: truncation_radius(q),
    }
}

fn series_derivative(q: f64) -> DivergenceResult {
    let value = SMALL_SNR_SERIES
        .iter()
        .rev()
        .map(|&(m, c)| m as f64 * c * q.powi(m - 1))
        .sum();
    DivergenceResult {
        value,
        error_estimate: 11.0 * SMALL_SNR_SERIES_NEXT * q.powi(10),
        truncation_radius: truncation_radius(q),
    }
}

/// `ln f(r) − ln g(r)`, with the `ln r` terms cancelling.
#[inline]
fn log_ratio(r: f64, p: &EnvelopeDensityParams) -> (f64, f64) {
    let lf = rician_log_pdf_unchecked(r, p);
    let lg = rayleigh_log_pdf_unchecked(r, p);
    (lf, lf - lg)
}

/// Initial panel edges: the Rician bulk sits around `r = √q` with unit width.
fn breakpoints(p: &EnvelopeDensityParams, radius: f64) -> Vec<f64> {
    let c = p.sqrt_q();
    let mut pts = vec![0.0];
    for off in [-10.0, -5.0, -2.0, 0.0, 2.0, 5.0, 10.0] {
        let x = c + off;
        if x > *pts.last().unwrap() && x < radius {
            pts.push(x);
        }
    }
    pts.push(radius);
    pts
}

/// Bound on `∫_R^∞ f·|ln(f/g)| dr` from `f(r) ≤ r·exp(−(r − √q)²/2)` and a
/// term-by-term bound on the log ratio.
fn tail_bound(p: &EnvelopeDensityParams, radius: f64) -> Result<f64> {
    let c = p.sqrt_q();
    let s = p.rayleigh_scale();
    let envelope = |r: f64| {
        let d = r - c;
        let gauss = -0.5 * d * d;
        if gauss < -745.0 {
            return 0.0;
        }
        let log_ratio_bound = 0.5 * d * d + s.ln() + 0.5 * r * r / s - i0e(r * c).ln();
        r * gauss.exp() * log_ratio_bound
    };
    let opts = AdaptiveOptions {
        abs_tol: 1e-30,
        rel_tol: 1e-3,
        max_subdivisions: 200,
    };
    let edges: Vec<f64> = (0..=8).map(|i| radius + 5.0 * i as f64).collect();
    // An over-estimate is acceptable here, so the best effort is kept on
    // non-convergence.
    match quadrature::integrate(envelope, &edges, &opts) {
        Ok(i) => Ok(i.value + i.error_estimate),
        Err(Error::Convergence {
            estimate,
            error_estimate,
            ..
        }) => Ok(estimate + error_estimate),
        Err(e) => Err(e),
    }
}

fn integrate_envelope<F: Fn(f64, &EnvelopeDensityParams) -> f64>(
    q: f64,
    spec: &QuadratureSpec,
    integrand: F,
) -> Result<DivergenceResult> {
    let p = EnvelopeDensityParams::new(q)?;
    let mut radius = truncation_radius(q);
    let mut tail = tail_bound(&p, radius)?;
    let mut widenings = 0;
    while tail > spec.tail_mass_bound {
        widenings += 1;
        if widenings > 8 {
            return Err(Error::Convergence {
                message: format!("tail mass {tail:e} above bound at radius {radius}"),
                estimate: f64::NAN,
                error_estimate: tail,
            });
        }
        radius *= 1.5;
        tail = tail_bound(&p, radius)?;
    }
    let edges = breakpoints(&p, radius);
    let integral = quadrature::integrate(|r| integrand(r, &p), &edges, &spec.adaptive()).map_err(
        |e| match e {
            Error::Convergence {
                message,
                estimate,
                error_estimate,
            } => Error::Convergence {
                message: format!("q = {q}: {message}"),
                estimate,
                error_estimate: error_estimate + tail,
            },
            other => other,
        },
    )?;
    Ok(DivergenceResult {
        value: integral.value,
        error_estimate: integral.error_estimate + tail,
        truncation_radius: radius,
    })
}

/// `D(q) = ∫₀^∞ f(r) ln(f(r)/g(r)) dr` for one random-phase wave at SNR `q`.
pub fn divergence_single(q: f64, spec: &QuadratureSpec) -> Result<DivergenceResult> {
    check_snr(q)?;
    spec.validate()?;
    if q == 0.0 {
        return Ok(DivergenceResult {
            value: 0.0,
            error_estimate: 0.0,
            truncation_radius: truncation_radius(0.0),
        });
    }
    if q < SERIES_SNR_LIMIT {
        return Ok(series_value(q));
    }
    integrate_envelope(q, spec, |r, p| {
        if r == 0.0 {
            return 0.0;
        }
        let (lf, lr) = log_ratio(r, p);
        if lf < -745.0 {
            0.0
        } else {
            lf.exp() * lr
        }
    })
}

/// `dD/dq`, by quadrature of the differentiated integrand
/// `(∂f/∂q)·ln(f/g) − f·∂(ln g)/∂q`.
///
/// `q = 0` returns 0 (both `D` and `D'` vanish there); negative `q` is rejected.
pub fn divergence_derivative(q: f64, spec: &QuadratureSpec) -> Result<DivergenceResult> {
    check_snr(q)?;
    spec.validate()?;
    if q == 0.0 {
        return Ok(DivergenceResult {
            value: 0.0,
            error_estimate: 0.0,
            truncation_radius: truncation_radius(0.0),
        });
    }
    if q < SERIES_SNR_LIMIT {
        return Ok(series_derivative(q));
    }
    let s = 1.0 + 0.5 * q;
    let dlog_g_const = -1.0 / (2.0 + q);
    let dlog_g_quad = 0.25 / (s * s);
    let half_inv_sqrt_q = 0.5 / q.sqrt();
    integrate_envelope(q, spec, move |r, p| {
        if r == 0.0 {
            return 0.0;
        }
        let (lf, lr) = log_ratio(r, p);
        if lf < -745.0 {
            return 0.0;
        }
        let x = r * p.sqrt_q();
        // (r / 2√q)·I1/I0(r√q) → r²/4 as r√q → 0.
        let bessel_term = if x < 1e-6 {
            0.25 * r * r
        } else {
            r * half_inv_sqrt_q * ratio_i1_i0(x)
        };
        let dlog_f = -0.5 + bessel_term;
        let dlog_g = dlog_g_const + dlog_g_quad * r * r;
        lf.exp() * (dlog_f * lr - dlog_g)
    })
}

/// Evaluate `model` once per distinct wave SNR `α_i²·q`, then combine the
/// terms in allocation order with `weight(α_i²)`.
pub(crate) fn per_wave_sum<E, W>(
    alloc: &SpectrumAllocation,
    q: f64,
    eval: E,
    weight: W,
) -> Result<(f64, f64)>
where
    E: Fn(f64) -> Result<DivergenceResult> + Sync,
    W: Fn(f64) -> f64,
{
    let mut distinct: Vec<f64> = Vec::new();
    let index: Vec<usize> = alloc
        .energies()
        .iter()
        .map(|&e| {
            let gamma = e * q;
            match distinct
                .iter()
                .position(|&g| g.to_bits() == gamma.to_bits())
            {
                Some(i) => i,
                None => {
                    distinct.push(gamma);
                    distinct.len() - 1
                }
            }
        })
        .collect();
    let results: Vec<DivergenceResult> = distinct
        .par_iter()
        .map(|&g| eval(g))
        .collect::<Result<_>>()?;
    let mut value = 0.0;
    let mut error = 0.0;
    for (&e, &i) in alloc.energies().iter().zip(&index) {
        let w = weight(e);
        value += w * results[i].value;
        error += w.abs() * results[i].error_estimate;
    }
    Ok((value, error))
}

/// `D_N(q) = Σ_i D(α_i²·q)`. Terms are summed in allocation order whatever
/// the degree of parallelism.
pub fn divergence_sum<M: DivergenceModel + ?Sized>(
    alloc: &SpectrumAllocation,
    q: f64,
    model: &M,
) -> Result<DivergenceResult> {
    check_snr(q)?;
    let (value, error_estimate) = per_wave_sum(alloc, q, |g| model.divergence(g), |_| 1.0)?;
    Ok(DivergenceResult {
        value,
        error_estimate,
        truncation_radius: truncation_radius(q),
    })
}

/// Default small-SNR grid: `0.1·2^{-k}` for `k = 0..=9`.
pub fn default_d2_grid() -> Vec<f64> {
    (0..10).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

/// Estimate `D''(0)` from `D(q)/q²` on a descending geometric grid.
pub fn estimate_d2_at_zero(
    spec: &QuadratureSpec,
    q_grid: &[f64],
) -> Result<AsymptoticCoefficients> {
    spec.validate()?;
    if let Some(&smallest) = q_grid.last() {
        if smallest < D2_GRID_FLOOR && spec.abs_tol > 1e-16 {
            return Err(domain(format!(
                "grid reaches q = {smallest:e} < {D2_GRID_FLOOR:e}; abs_tol must be <= 1e-16"
            )));
        }
    }
    estimate_d2_from(|q| divergence_single(q, spec).map(|d| d.value), q_grid)
}

/// [`estimate_d2_at_zero`] with an arbitrary divergence function.
///
/// `D(q)/q²` is extrapolated to `q = 0` by the quadratic through the three
/// smallest grid points; the same extrapolation shifted one point up the grid
/// gives the residual.
pub fn estimate_d2_from<F>(divergence: F, q_grid: &[f64]) -> Result<AsymptoticCoefficients>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if q_grid.len() < 4 {
        return Err(domain("small-SNR grid needs at least four points"));
    }
    if q_grid.iter().any(|&q| !(q.is_finite() && q > 0.0)) {
        return Err(domain("small-SNR grid points must be finite and positive"));
    }
    let ratio = q_grid[1] / q_grid[0];
    let geometric = q_grid
        .windows(2)
        .all(|w| ((w[1] / w[0]) - ratio).abs() <= 1e-9 * ratio);
    if !(ratio < 1.0) || !geometric {
        return Err(domain(
            "small-SNR grid must be a strictly decreasing geometric sequence",
        ));
    }

    let scaled_values: Vec<f64> = q_grid
        .par_iter()
        .map(|&q| divergence(q).map(|d| d / (q * q)))
        .collect::<Result<_>>()?;

    let n = q_grid.len();
    let tail = &scaled_values[n - 3..];
    let monotone =
        (tail[0] >= tail[1] && tail[1] >= tail[2]) || (tail[0] <= tail[1] && tail[1] <= tail[2]);
    if !monotone {
        return Err(Error::Estimation {
            message: "D(q)/q² is not monotone over the three smallest grid points".into(),
            estimates: scaled_values,
        });
    }
    let limit = extrapolate_to_zero(&q_grid[n - 3..], &scaled_values[n - 3..]);
    let shifted = extrapolate_to_zero(&q_grid[n - 4..n - 1], &scaled_values[n - 4..n - 1]);
    let d2_at_zero = 2.0 * limit;
    let fit_residual = 2.0 * (limit - shifted).abs();
    if !(fit_residual <= D2_FIT_TOLERANCE) {
        return Err(Error::Estimation {
            message: format!("extrapolation unstable: residual {fit_residual:e}"),
            estimates: vec![2.0 * limit, 2.0 * shifted],
        });
    }
    Ok(AsymptoticCoefficients {
        d2_at_zero,
        fit_residual,
        grid: q_grid.to_vec(),
        scaled_values,
    })
}

/// Neville's scheme for the interpolating polynomial through `(x_i, y_i)`,
/// evaluated at 0.
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] += (p[i + 1] - p[i]) * (0.0 - xi) / (xj - xi);
        }
    }
    p[0]
}
