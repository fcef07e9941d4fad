use crate::config::RunConfig;
use crate::svg::{self, Series};
use crate::Failure;
use nbmmse::divergence::default_d2_grid;
use nbmmse::{
    cmmse_gaussian, cmmse_tone_sum, divergence_sum, estimate_d2_at_zero, mmse_gaussian,
    mmse_tone_sum, ChannelSnr, DivergenceModel, SpectrumAllocation,
};
use rayon::prelude::*;
use std::fmt::Write as _;

pub const SWEEP_HEADER: &str = "n,q,d_n,cmmse_tone,cmmse_gauss,mmse_tone,mmse_gauss,err_bound";

/// Divergence values closer than this to the maximum also count as argmax.
const ARGMAX_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub q: f64,
    pub d_n: f64,
    pub cmmse_tone: f64,
    pub cmmse_gauss: f64,
    pub mmse_tone: f64,
    pub mmse_gauss: f64,
    pub err_bound: f64,
}

impl SweepRow {
    fn compute(n: usize, q: f64, model: &dyn DivergenceModel) -> Result<Self, Failure> {
        let alloc = SpectrumAllocation::equal(n)?;
        let snr = ChannelSnr::new(q)?;
        let d = divergence_sum(&alloc, q, model)?;
        let c = cmmse_tone_sum(&alloc, snr, model)?;
        let m = mmse_tone_sum(&alloc, snr, model)?;
        Ok(Self {
            n,
            q,
            d_n: d.value,
            cmmse_tone: c.value,
            cmmse_gauss: cmmse_gaussian(&alloc, snr),
            mmse_tone: m.value,
            mmse_gauss: mmse_gaussian(&alloc, snr),
            err_bound: c.error_bound.max(m.error_bound),
        })
    }

    /// `|cmmse_gauss − cmmse_tone − (2/q)·d_n|`.
    pub fn gap_residual(&self) -> f64 {
        let divergence_term = if self.q == 0.0 {
            0.0
        } else {
            2.0 * self.d_n / self.q
        };
        (self.cmmse_gauss - self.cmmse_tone - divergence_term).abs()
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            fmt(self.q),
            fmt(self.d_n),
            fmt(self.cmmse_tone),
            fmt(self.cmmse_gauss),
            fmt(self.mmse_tone),
            fmt(self.mmse_gauss),
            fmt(self.err_bound)
        )
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn rows(config: &RunConfig) -> Result<Vec<SweepRow>, Failure> {
    let model = config.model();
    let jobs: Vec<(f64, usize)> = config
        .qs
        .iter()
        .flat_map(|&q| (config.n_min..=config.n_max).map(move |n| (q, n)))
        .collect();
    jobs.par_iter()
        .map(|&(q, n)| SweepRow::compute(n, q, model.as_ref()))
        .collect()
}

fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Every `n` whose `d_n` is within [`ARGMAX_TIE`] of the largest.
pub fn argmax_waves(rows: &[SweepRow]) -> Vec<usize> {
    let best = rows.iter().map(|r| r.d_n).fold(f64::NEG_INFINITY, f64::max);
    rows.iter()
        .filter(|r| best - r.d_n <= ARGMAX_TIE)
        .map(|r| r.n)
        .collect()
}

fn per_q<'a>(
    config: &'a RunConfig,
    rows: &'a [SweepRow],
) -> impl Iterator<Item = (f64, Vec<SweepRow>)> + 'a {
    config.qs.iter().map(move |&q| {
        let subset = rows
            .iter()
            .filter(|r| r.q.to_bits() == q.to_bits())
            .copied()
            .collect();
        (q, subset)
    })
}

pub fn divergence_sweep(config: &RunConfig) -> Result<(), Failure> {
    let rows = rows(config)?;
    config.emit(&to_csv(&rows))?;
    let mut series = Vec::new();
    for (q, subset) in per_q(config, &rows) {
        let best = argmax_waves(&subset);
        let peak = subset
            .iter()
            .map(|r| r.d_n)
            .fold(f64::NEG_INFINITY, f64::max);
        let list: Vec<String> = best.iter().map(|n| n.to_string()).collect();
        eprintln!(
            "q = {q}: argmax_N D_N = {{{}}} (D_N = {peak:.10})",
            list.join(", ")
        );
        series.push(Series {
            label: format!("D_N, q = {q}"),
            points: subset.iter().map(|r| (r.n as f64, r.d_n)).collect(),
        });
    }
    if let Some(path) = &config.svg {
        std::fs::write(
            path,
            svg::line_chart("Divergence against N", "N", "D_N (nats)", &series),
        )?;
    }
    Ok(())
}

/// Fails on the first row whose gap residual exceeds its error bound.
fn check_gap_identity(rows: &[SweepRow]) -> Result<(), Failure> {
    for r in rows {
        // One rounding in the subtraction is allowed on top of the bound.
        let allowed = r.err_bound + f64::EPSILON * r.cmmse_gauss.abs().max(1.0);
        if r.gap_residual() > allowed {
            return Err(Failure::Identity(format!(
                "N = {}, q = {}: cmmse_gauss - cmmse_tone differs from 2·D_N/q by {:e} (bound {:e})",
                r.n,
                r.q,
                r.gap_residual(),
                allowed
            )));
        }
    }
    Ok(())
}

pub fn error_sweep(config: &RunConfig) -> Result<(), Failure> {
    let rows = rows(config)?;
    check_gap_identity(&rows)?;
    config.emit(&to_csv(&rows))?;
    if let Some(path) = &config.svg {
        let mut series = Vec::new();
        for (q, subset) in per_q(config, &rows) {
            let col = |name: &str, f: fn(&SweepRow) -> f64| Series {
                label: format!("{name}, q = {q}"),
                points: subset.iter().map(|r| (r.n as f64, f(r))).collect(),
            };
            series.push(col("CMMSE tone", |r| r.cmmse_tone));
            series.push(col("CMMSE Gaussian", |r| r.cmmse_gauss));
            series.push(col("MMSE tone", |r| r.mmse_tone));
            series.push(col("MMSE Gaussian", |r| r.mmse_gauss));
        }
        std::fs::write(
            path,
            svg::line_chart("Estimation error against N", "N", "error", &series),
        )?;
    }
    Ok(())
}

pub const ASYMPTOTICS_HEADER: &str =
    "n,q,causal_rate,smooth_rate,causal_prediction,smooth_prediction,\
causal_rel_gap,smooth_rel_gap,causal_rate_gauss,smooth_rate_gauss";

fn relative_gap(value: f64, prediction: f64) -> f64 {
    if prediction == 0.0 {
        0.0
    } else {
        ((value - prediction) / prediction).abs()
    }
}

struct RateRow {
    n: usize,
    q: f64,
    causal: f64,
    smooth: f64,
    causal_pred: f64,
    smooth_pred: f64,
    causal_gauss: f64,
    smooth_gauss: f64,
}

impl RateRow {
    fn causal_gap(&self) -> f64 {
        relative_gap(self.causal, self.causal_pred)
    }

    fn smooth_gap(&self) -> f64 {
        relative_gap(self.smooth, self.smooth_pred)
    }

    fn csv_line(&self) -> String {
        [
            self.n.to_string(),
            fmt(self.q),
            fmt(self.causal),
            fmt(self.smooth),
            fmt(self.causal_pred),
            fmt(self.smooth_pred),
            fmt(self.causal_gap()),
            fmt(self.smooth_gap()),
            fmt(self.causal_gauss),
            fmt(self.smooth_gauss),
        ]
        .join(",")
    }
}

pub fn asymptotics(config: &RunConfig) -> Result<(), Failure> {
    let coeffs = estimate_d2_at_zero(&config.quadrature, &default_d2_grid())?;
    let d2 = coeffs.d2_at_zero;
    let model = config.model();
    let waves: Vec<usize> = (0..usize::BITS)
        .map(|k| 1usize << k)
        .filter(|n| (config.n_min..=config.n_max).contains(n))
        .collect();
    if waves.is_empty() {
        return Err(Failure::Numerical(format!(
            "no power of two in {}..={}",
            config.n_min, config.n_max
        )));
    }
    let jobs: Vec<(f64, usize)> = config
        .qs
        .iter()
        .flat_map(|&q| waves.iter().map(move |&n| (q, n)))
        .collect();
    let rows: Vec<RateRow> = jobs
        .par_iter()
        .map(|&(q, n)| -> Result<_, Failure> {
            let alloc = SpectrumAllocation::equal(n)?;
            let snr = ChannelSnr::new(q)?;
            let nf = n as f64;
            Ok(RateRow {
                n,
                q,
                causal: nf * (1.0 - cmmse_tone_sum(&alloc, snr, model.as_ref())?.value),
                smooth: nf * (1.0 - mmse_tone_sum(&alloc, snr, model.as_ref())?.value),
                causal_pred: (0.25 + d2) * q,
                smooth_pred: (0.5 + 2.0 * d2) * q,
                causal_gauss: nf * (1.0 - cmmse_gaussian(&alloc, snr)),
                smooth_gauss: nf * (1.0 - mmse_gaussian(&alloc, snr)),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut out = String::new();
    writeln!(out, "{ASYMPTOTICS_HEADER}").unwrap();
    for r in &rows {
        writeln!(out, "{}", r.csv_line()).unwrap();
    }
    config.emit(&out)?;
    eprintln!(
        "d2_at_zero = {d2:e} (fit residual {:e})",
        coeffs.fit_residual
    );
    let mut series = Vec::new();
    for &q in &config.qs {
        let subset: Vec<&RateRow> = rows
            .iter()
            .filter(|r| r.q.to_bits() == q.to_bits())
            .collect();
        if let Some(last) = subset.last() {
            eprintln!(
                "q = {q}, N = {}: relative gaps causal {:e}, non-causal {:e}",
                last.n,
                last.causal_gap(),
                last.smooth_gap()
            );
        }
        let col = |name: &str, f: fn(&RateRow) -> f64| Series {
            label: format!("{name}, q = {q}"),
            points: subset.iter().map(|r| ((r.n as f64).log2(), f(r))).collect(),
        };
        series.push(col("N(1 - CMMSE)", |r| r.causal));
        series.push(col("N(1 - MMSE)", |r| r.smooth));
    }
    if let Some(path) = &config.svg {
        std::fs::write(
            path,
            svg::line_chart("Large-N error rates", "log2 N", "rate", &series),
        )?;
    }
    Ok(())
}
