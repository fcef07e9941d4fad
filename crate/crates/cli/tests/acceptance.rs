//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use nbmmse::divergence::default_d2_grid;
use nbmmse::simkit::{cmmse_causal_estimate, mmse_sum_oracle_quadrature};
use nbmmse::{
    check_bridge, divergence_single, estimate_d2_at_zero, mmse_tone_sum, ChannelSnr,
    MonteCarloSpec, QuadratureSpec, SpectrumAllocation, ToneGrid,
};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

/// `(2N/100)·ln(1 + 50/N)` for N = 1..40, from a 40-digit evaluation.
const CMMSE_GAUSS_Q100: [f64; 40] = [
    0.0786365126544865154328956,
    0.1303238615208592818188288,
    0.1723007774930407285649534,
    0.2082151748355507011814803,
    0.2397895272798370544061944,
    0.2680310665808513079053486,
    0.2935997566290931584818488,
    0.3169602350186533453358092,
    0.3384563159825100122086008,
    0.3583518938456110001624955,
    0.376855290102486955031678,
    0.3941346564617018988280049,
    0.4103281959217989474790125,
    0.4255512110484357077546262,
    0.4399011206380281133974727,
    0.4534611263317261783057576,
    0.4663029536138149930029827,
    0.4784889410207791224754595,
    0.4900736596637111904333288,
    0.5011051873981471982752482,
    0.5116261245135148184281198,
    0.5216744128894053613277249,
    0.5312840036008510616112638,
    0.5404854061709875843864254,
    0.5493061443340548456976226,
    0.5577711371777214973538415,
    0.5659030201586515784900427,
    0.5737224172480571752386428,
    0.5812481730387175308540106,
    0.5884975518070357421138707,
    0.5954864091161213621841263,
    0.6022293404572970023666143,
    0.608739810577877674092067,
    0.6150302664744635134544409,
    0.6211122365006319426009273,
    0.6269964176141263665108863,
    0.632692752447665862915712,
    0.6382104976113837341944091,
    0.6435582844099448604778846,
    0.648744172973063011164821,
];

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn nbmmse(args: &[&str]) -> (i32, String, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_nbmmse"))
        .args(args)
        .env("NBMMSE_THREADS", "0")
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    (out.status.code().unwrap_or(-1), stderr, elapsed)
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn figure_1(dir: &Path) -> Outcome {
    let csv = dir.join("d_sweep.csv");
    let (code, stderr, elapsed) = nbmmse(&[
        "d-sweep",
        "--q",
        "100",
        "--n-min",
        "1",
        "--n-max",
        "40",
        "--out",
        csv.to_str().unwrap(),
    ]);
    if code != 0 {
        return Err(format!("exit {code}: {stderr}"));
    }
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    let d: Vec<f64> = read_csv(&csv).iter().map(|r| r[2]).collect();
    if d.len() != 40 || d.iter().any(|&v| v <= 0.0) {
        return Err(format!("expected 40 positive values, got {d:?}"));
    }
    let peak = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let argmax = d.iter().position(|&v| v == peak).unwrap() + 1;
    if !(6..=8).contains(&argmax) {
        return Err(format!("argmax N = {argmax}"));
    }
    if let Some(i) = (argmax + 1..39).find(|&i| d[i + 1] >= d[i]) {
        return Err(format!("D_N not decreasing at N = {}", i + 1));
    }
    Ok(format!(
        "argmax N = {argmax}, D_max = {peak:.6}, {elapsed:.2?}"
    ))
}

fn figure_2(dir: &Path) -> Outcome {
    let csv = dir.join("error_sweep.csv");
    let (code, stderr, _) = nbmmse(&["error-sweep", "--q", "100", "--out", csv.to_str().unwrap()]);
    if code != 0 {
        return Err(format!("exit {code}: {stderr}"));
    }
    let rows = read_csv(&csv);
    let mut worst_gauss: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for (row, want) in rows.iter().zip(CMMSE_GAUSS_Q100) {
        let (d_n, tone, gauss, bound) = (row[2], row[3], row[4], row[7]);
        worst_gauss = worst_gauss.max((gauss - want).abs());
        let gap = (gauss - tone - 0.02 * d_n).abs();
        worst_gap = worst_gap.max(gap);
        if bound > 1e-8 {
            return Err(format!("N = {}: error bound {bound:e} above 1e-8", row[0]));
        }
        if gap > bound.max(1e-15) {
            return Err(format!(
                "N = {}: gap residual {gap:e} above bound {bound:e}",
                row[0]
            ));
        }
    }
    if rows.len() != 40 || worst_gauss > 1e-12 {
        return Err(format!(
            "{} rows, Gaussian error deviation {worst_gauss:e}",
            rows.len()
        ));
    }
    Ok(format!(
        "Gaussian deviation {worst_gauss:.1e}, gap residual {worst_gap:.1e}"
    ))
}

fn noncausal_oracle() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for n in [1usize, 7] {
        let alloc = SpectrumAllocation::equal(n).unwrap();
        for q in [2.0, 100.0] {
            let snr = ChannelSnr::new(q).unwrap();
            let closed = mmse_tone_sum(&alloc, snr, &spec)
                .map_err(|e| e.to_string())?
                .value;
            let (oracle, _) =
                mmse_sum_oracle_quadrature(&alloc, snr, &spec).map_err(|e| e.to_string())?;
            worst = worst.max((closed - oracle).abs());
        }
    }
    if worst > 1e-6 {
        return Err(format!("max deviation {worst:e}"));
    }
    Ok(format!("max deviation {worst:.1e}"))
}

fn causal_monte_carlo() -> Outcome {
    let mc = MonteCarloSpec {
        paths: 20_000,
        dt: 1.0 / 8192.0,
        theta_grid_size: 512,
        seed: 42,
    };
    let q = 2.0;
    let d = divergence_single(q, &QuadratureSpec::default())
        .unwrap()
        .value;
    let target = (2.0 / q) * ((0.5 * q).ln_1p() - d);
    let start = Instant::now();
    let est = cmmse_causal_estimate(
        &ToneGrid::unit(1).unwrap(),
        ChannelSnr::new(q).unwrap(),
        &mc,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let tolerance = (3.0 * est.std_error).max(0.01 * target);
    let diff = (est.estimate - target).abs();
    let summary = format!(
        "estimate {:.5} ± {:.5}, closed form {target:.5}, |diff| {diff:.5} (tol {tolerance:.5}), {elapsed:.1?}",
        est.estimate, est.std_error
    );
    if diff > tolerance || elapsed >= Duration::from_secs(600) {
        return Err(summary);
    }
    Ok(summary)
}

fn bridges() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for n in [1usize, 4, 7] {
        let alloc = SpectrumAllocation::equal(n).unwrap();
        for q in [0.5, 1.0, 10.0, 100.0] {
            let r = check_bridge(&alloc, ChannelSnr::new(q).unwrap(), &spec)
                .map_err(|e| e.to_string())?;
            if r.max() >= 1e-6 {
                return Err(format!("N = {n}, q = {q}: {r:?}"));
            }
            worst = worst.max(r.max());
        }
    }
    Ok(format!("max residual {worst:.1e}"))
}

fn asymptotics(dir: &Path) -> Outcome {
    let spec = QuadratureSpec {
        abs_tol: 1e-16,
        tail_mass_bound: 1e-17,
        ..QuadratureSpec::default()
    };
    let fine = estimate_d2_at_zero(&spec, &default_d2_grid()).map_err(|e| e.to_string())?;
    let coarse_grid: Vec<f64> = default_d2_grid().into_iter().step_by(2).collect();
    let coarse = estimate_d2_at_zero(&spec, &coarse_grid).map_err(|e| e.to_string())?;
    if fine.fit_residual >= 1e-4 || coarse.fit_residual >= 1e-4 {
        return Err(format!(
            "fit residuals {:e}, {:e}",
            fine.fit_residual, coarse.fit_residual
        ));
    }
    // The exact expansion starts at q^4, so the curvature at zero is 0.
    if fine.d2_at_zero.abs() >= 1e-4 || (fine.d2_at_zero - coarse.d2_at_zero).abs() >= 1e-4 {
        return Err(format!(
            "d2 = {:e} / {:e}",
            fine.d2_at_zero, coarse.d2_at_zero
        ));
    }

    let csv = dir.join("asymptotics.csv");
    let (code, stderr, _) = nbmmse(&["asymptotics", "--q", "1", "--out", csv.to_str().unwrap()]);
    if code != 0 {
        return Err(format!("exit {code}: {stderr}"));
    }
    let rows = read_csv(&csv);
    let waves: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    if waves != (1..=10).map(|k| f64::from(1u32 << k)).collect::<Vec<_>>() {
        return Err(format!("unexpected N column {waves:?}"));
    }
    for w in rows.windows(2) {
        if w[1][6] >= w[0][6] || w[1][7] >= w[0][7] {
            return Err(format!("gaps not shrinking at N = {}", w[1][0]));
        }
    }
    let last = rows.last().unwrap();
    if last[6] >= 1e-2 || last[7] >= 1e-2 {
        return Err(format!("gaps at N = 1024: {:e}, {:e}", last[6], last[7]));
    }
    Ok(format!(
        "d2 = {:.1e} (residual {:.1e}), gaps at N = 1024: {:.1e} / {:.1e}",
        fine.d2_at_zero, fine.fit_residual, last[6], last[7]
    ))
}

fn property_suites(dir: &Path) -> Outcome {
    let first = dir.join("verify_1.json");
    let second = dir.join("verify_2.json");
    let (code, stderr, _) = nbmmse(&["verify", "--seed", "42", "--out", first.to_str().unwrap()]);
    if code != 0 {
        return Err(format!("verify exit {code}: {stderr}"));
    }
    let (code, _, _) = nbmmse(&["verify", "--seed", "42", "--out", second.to_str().unwrap()]);
    if code != 0 {
        return Err(format!("second verify exit {code}"));
    }
    let (a, b) = (
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap(),
    );
    if a != b {
        return Err("reports differ between identical runs".into());
    }
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let required = [
        "density_normalization",
        "second_moment_matching",
        "gibbs_nonnegativity",
        "derivative_nonnegativity",
        "gaussian_dominance_cmmse",
        "gaussian_dominance_mmse",
        "mmse_le_cmmse_le_one",
        "ks_envelope_gamma_1_p_value",
        "ks_envelope_gamma_10_p_value",
    ];
    for name in required {
        let found = checks.iter().find(|c| c["check_name"] == name);
        match found {
            Some(c) if c["passed"] == true => {}
            Some(c) => return Err(format!("{name} failed: {c}")),
            None => return Err(format!("{name} missing from report")),
        }
    }
    let tampered = dir.join("verify_tampered.json");
    let (code, _, _) = nbmmse(&[
        "verify",
        "--inject-divergence-bias",
        "0.01",
        "--out",
        tampered.to_str().unwrap(),
    ]);
    if code != 1 {
        return Err(format!("tampered run exited {code}, expected 1"));
    }
    Ok(format!(
        "{} checks passed, report byte-identical, tampered run exits 1",
        checks.len()
    ))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: [Criterion; 7] = [
        (
            "1 divergence sweep at q = 100",
            Box::new(|| figure_1(dir.path())),
        ),
        (
            "2 error sweep at q = 100",
            Box::new(|| figure_2(dir.path())),
        ),
        ("3 non-causal oracle", Box::new(noncausal_oracle)),
        (
            "4 causal Monte Carlo at q = 2",
            Box::new(causal_monte_carlo),
        ),
        ("5 bridge identities", Box::new(bridges)),
        (
            "6 small-SNR asymptotics",
            Box::new(|| asymptotics(dir.path())),
        ),
        (
            "7 property suites under verify",
            Box::new(|| property_suites(dir.path())),
        ),
    ];
    let mut failures = 0;
    for (name, check) in criteria.iter() {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
