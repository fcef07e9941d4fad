//! Exponentially scaled modified Bessel functions of order 0 and 1, and the
//! Rician / Rayleigh envelope densities, all evaluated in the log domain.
//!
//! `I0(x)` overflows an `f64` near `x = 713`, and the Rician density needs
//! `I0(r·√q)` for `r` far into the tail, so everything here works with
//! `e^{-x}·I0(x)` and log-densities. The linear-domain density is only ever
//! obtained as `exp(log_pdf)`.

use crate::error::{domain, Result};
use std::f64::consts::PI;

/// Below this argument the power series is summed directly; above it the
/// Hankel asymptotic expansion is used. At the crossover the smallest
/// asymptotic term is about `e^{-2x} ≈ 1e-26`, and the series terms are all
/// positive so summing them loses nothing to cancellation.
const SERIES_LIMIT: f64 = 30.0;

/// Shape parameter `q ≥ 0` shared by the Rician and Rayleigh envelope laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeDensityParams {
    q: f64,
    sqrt_q: f64,
}

impl EnvelopeDensityParams {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q < 0.0 {
            return Err(domain(format!(
                "density parameter q must be finite and >= 0, got {q}"
            )));
        }
        Ok(Self {
            q,
            sqrt_q: q.sqrt(),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sqrt_q(&self) -> f64 {
        self.sqrt_q
    }

    /// Variance scale `1 + q/2` of the covariance-matched Rayleigh law.
    pub fn rayleigh_scale(&self) -> f64 {
        1.0 + 0.5 * self.q
    }
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(domain(format!(
            "Bessel argument must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

/// `e^{-x}·I0(x)` for `x ≥ 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(i0e(x))
}

/// `e^{-x}·I1(x)` for `x ≥ 0`.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(i1e(x))
}

/// `I1(x)/I0(x)` for `x ≥ 0`: the mean resultant length of a von Mises law
/// with concentration `x`.
pub fn bessel_ratio_i1_i0(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(ratio_i1_i0(x))
}

pub(crate) fn i0e(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        series_i0(x) * (-x).exp()
    } else {
        asymptotic_scaled(x, 0.0)
    }
}

pub(crate) fn i1e(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        series_i1(x) * (-x).exp()
    } else {
        asymptotic_scaled(x, 1.0)
    }
}

pub(crate) fn ratio_i1_i0(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x <= SERIES_LIMIT {
        series_i1(x) / series_i0(x)
    } else {
        asymptotic_scaled(x, 1.0) / asymptotic_scaled(x, 0.0)
    }
}

fn series_i0(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= y / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

fn series_i1(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= y / (k * (k + 1.0));
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// Hankel expansion `e^{-x} I_ν(x) ~ (2πx)^{-1/2} Σ_k (-1)^k a_k(ν) / x^k`,
/// truncated before the terms start to grow.
fn asymptotic_scaled(x: f64, nu: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while k < 200.0 {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * x * k);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum / (2.0 * PI * x).sqrt()
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_nan() || r < 0.0 {
        return Err(domain(format!("envelope radius must be >= 0, got {r}")));
    }
    Ok(())
}

/// `ln f(r)` for the Rician envelope density
/// `f(r) = r·exp(-(r² + q)/2)·I0(r√q)`.
///
/// The exponent is regrouped as `-(r - √q)²/2 + ln(e^{-r√q} I0(r√q))`, which
/// stays finite for arbitrarily large `r√q`.
pub fn rician_log_pdf(r: f64, p: &EnvelopeDensityParams) -> Result<f64> {
    check_radius(r)?;
    Ok(rician_log_pdf_unchecked(r, p))
}

/// `ln g(r)` for the Rayleigh density with `E r² = 2 + q`:
/// `g(r) = r/(1 + q/2)·exp(-r²/(2(1 + q/2)))`.
pub fn rayleigh_log_pdf(r: f64, p: &EnvelopeDensityParams) -> Result<f64> {
    check_radius(r)?;
    Ok(rayleigh_log_pdf_unchecked(r, p))
}

pub(crate) fn rician_log_pdf_unchecked(r: f64, p: &EnvelopeDensityParams) -> f64 {
    if r == 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = r - p.sqrt_q;
    r.ln() - 0.5 * d * d + i0e(r * p.sqrt_q).ln()
}

pub(crate) fn rayleigh_log_pdf_unchecked(r: f64, p: &EnvelopeDensityParams) -> f64 {
    if r == 0.0 {
        return f64::NEG_INFINITY;
    }
    let s = p.rayleigh_scale();
    r.ln() - s.ln() - 0.5 * r * r / s
}
