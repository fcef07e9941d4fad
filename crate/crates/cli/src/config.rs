//! Run configuration: defaults per subcommand, then an optional JSON file,
//! then command-line flags.

use crate::Failure;
use clap::Args;
use nbmmse::{BiasedDivergence, DivergenceModel, MonteCarloSpec, QuadratureSpec};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// SNR q; a comma-separated list sweeps several values.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Smallest wave count N.
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Largest wave count N.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Absolute tolerance of the envelope quadratures.
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Relative tolerance of the envelope quadratures.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Monte Carlo seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo path count for the causal filter.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Time steps per unit horizon (dt = 1/dt_steps).
    #[arg(long)]
    pub dt_steps: Option<usize>,
    /// Number of phase grid points in the causal filter.
    #[arg(long)]
    pub theta_grid: Option<usize>,
    /// Output file (CSV, or JSON for `verify`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional SVG chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// JSON configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scale D by (1 + bias) but not dD/dq. Negative control for `verify`.
    #[arg(long, hide = true)]
    pub inject_divergence_bias: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SnrList {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    q: Option<SnrList>,
    n_min: Option<usize>,
    n_max: Option<usize>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_subdivisions: Option<usize>,
    seed: Option<u64>,
    paths: Option<usize>,
    dt_steps: Option<usize>,
    theta_grid: Option<usize>,
    out: Option<PathBuf>,
    svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    DSweep,
    ErrorSweep,
    Asymptotics,
    Verify,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub qs: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
    pub quadrature: QuadratureSpec,
    pub mc: MonteCarloSpec,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub divergence_bias: Option<f64>,
}

struct Defaults {
    q: f64,
    n_min: usize,
    n_max: usize,
    paths: usize,
    dt_steps: usize,
    theta_grid: usize,
}

fn defaults(mode: Mode) -> Defaults {
    let full = MonteCarloSpec::default();
    let base = Defaults {
        q: 100.0,
        n_min: 1,
        n_max: 40,
        paths: full.paths,
        dt_steps: (1.0 / full.dt).round() as usize,
        theta_grid: full.theta_grid_size,
    };
    match mode {
        Mode::DSweep | Mode::ErrorSweep => base,
        Mode::Asymptotics => Defaults {
            q: 1.0,
            n_min: 2,
            n_max: 1024,
            ..base
        },
        // A lighter causal run keeps `verify` quick; pass the full settings
        // as flags for the long check.
        Mode::Verify => Defaults {
            q: 2.0,
            paths: 2000,
            dt_steps: 2048,
            theta_grid: 256,
            ..base
        },
    }
}

fn read_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Numerical(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Numerical(format!("bad config {}: {e}", path.display())))
}

fn check_writable(path: &Option<PathBuf>) -> Result<(), Failure> {
    if let Some(p) = path {
        let dir = match p.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        if !dir.is_dir() {
            return Err(Failure::Numerical(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
        if std::fs::metadata(dir)?.permissions().readonly() {
            return Err(Failure::Numerical(format!(
                "output directory {} is read-only",
                dir.display()
            )));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn resolve(mode: Mode, args: &CommonArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let d = defaults(mode);
        let qs = match (&args.q, file.q) {
            (Some(q), _) => q.clone(),
            (None, Some(SnrList::One(q))) => vec![q],
            (None, Some(SnrList::Many(q))) => q,
            (None, None) => vec![d.q],
        };
        if qs.is_empty() || qs.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Failure::Numerical(format!(
                "q must be finite and >= 0, got {qs:?}"
            )));
        }
        let n_min = args.n_min.or(file.n_min).unwrap_or(d.n_min);
        let n_max = args.n_max.or(file.n_max).unwrap_or(d.n_max);
        if n_min < 1 || n_min > n_max {
            return Err(Failure::Numerical(format!(
                "need 1 <= n_min <= n_max, got {n_min}..{n_max}"
            )));
        }

        let base = QuadratureSpec::default();
        let abs_tol = args.abs_tol.or(file.abs_tol).unwrap_or(base.abs_tol);
        let quadrature = QuadratureSpec {
            abs_tol,
            rel_tol: args.rel_tol.or(file.rel_tol).unwrap_or(base.rel_tol),
            max_subdivisions: file.max_subdivisions.unwrap_or(base.max_subdivisions),
            tail_mass_bound: base.tail_mass_bound.min(0.1 * abs_tol),
        };
        quadrature.validate()?;

        let dt_steps = args.dt_steps.or(file.dt_steps).unwrap_or(d.dt_steps);
        if dt_steps == 0 {
            return Err(Failure::Numerical("dt_steps must be >= 1".into()));
        }
        let mc = MonteCarloSpec {
            paths: args.paths.or(file.paths).unwrap_or(d.paths),
            dt: 1.0 / dt_steps as f64,
            theta_grid_size: args.theta_grid.or(file.theta_grid).unwrap_or(d.theta_grid),
            seed: args.seed.or(file.seed).unwrap_or(42),
        };
        mc.validate()?;

        let out = args.out.clone().or(file.out);
        let svg = args.svg.clone().or(file.svg);
        check_writable(&out)?;
        check_writable(&svg)?;

        Ok(Self {
            qs,
            n_min,
            n_max,
            quadrature,
            mc,
            out,
            svg,
            divergence_bias: args.inject_divergence_bias,
        })
    }

    /// The divergence source for the error formulas.
    pub fn model(&self) -> Box<dyn DivergenceModel> {
        match self.divergence_bias {
            Some(relative_bias) => Box::new(BiasedDivergence {
                spec: self.quadrature,
                relative_bias,
            }),
            None => Box::new(self.quadrature),
        }
    }

    /// Write `text` to `--out`, or to stdout.
    pub fn emit(&self, text: &str) -> Result<(), Failure> {
        match &self.out {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}
