use nbmmse::divergence::default_d2_grid;
use nbmmse::mmse::tone_error_pair;
use nbmmse::{
    asymptotic_errors, check_bridge, cmmse_gaussian, cmmse_tone_sum, divergence_sum,
    estimate_d2_at_zero, mmse_gaussian, mmse_tone_sum, ChannelSnr, QuadratureSpec,
    SpectrumAllocation,
};
use proptest::prelude::*;

const SNRS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
const WAVES: [usize; 4] = [1, 2, 7, 40];

fn snr(q: f64) -> ChannelSnr {
    ChannelSnr::new(q).unwrap()
}

#[test]
fn ordering_and_gaussian_dominance() {
    let spec = QuadratureSpec::default();
    for n in WAVES {
        let alloc = SpectrumAllocation::equal(n).unwrap();
        for q in SNRS {
            let p = tone_error_pair(&alloc, snr(q), &spec).unwrap();
            let slack = p.divergence_error_bound;
            assert!(p.mmse <= p.cmmse + slack, "N={n} q={q}: {p:?}");
            assert!(p.cmmse <= 1.0 + slack);
            assert!(p.mmse > 0.0);
            assert!(p.cmmse <= cmmse_gaussian(&alloc, snr(q)) + slack);
            assert!(p.mmse <= mmse_gaussian(&alloc, snr(q)) + slack);
        }
    }
}

#[test]
fn errors_decrease_with_snr() {
    let spec = QuadratureSpec::default();
    for n in WAVES {
        let alloc = SpectrumAllocation::equal(n).unwrap();
        let pairs: Vec<_> = SNRS
            .iter()
            .map(|&q| tone_error_pair(&alloc, snr(q), &spec).unwrap())
            .collect();
        for w in pairs.windows(2) {
            assert!(w[1].cmmse < w[0].cmmse, "N={n}: {w:?}");
            assert!(w[1].mmse < w[0].mmse, "N={n}: {w:?}");
        }
    }
}

#[test]
fn causal_gap_is_divergence() {
    let spec = QuadratureSpec::default();
    for n in WAVES {
        let alloc = SpectrumAllocation::equal(n).unwrap();
        for q in SNRS {
            let c = cmmse_tone_sum(&alloc, snr(q), &spec).unwrap();
            let d = divergence_sum(&alloc, q, &spec).unwrap();
            let gap = cmmse_gaussian(&alloc, snr(q)) - c.value;
            assert!(
                (gap - 2.0 * d.value / q).abs() <= 1e-15 + c.error_bound,
                "N={n} q={q}"
            );
        }
    }
}

#[test]
fn bridge_identities_hold() {
    let spec = QuadratureSpec::default();
    for n in WAVES {
        let alloc = SpectrumAllocation::equal(n).unwrap();
        for q in SNRS {
            let r = check_bridge(&alloc, snr(q), &spec).unwrap();
            assert!(r.max() < 1e-6, "N={n} q={q}: {r:?}");
        }
    }
}

#[test]
fn bridge_holds_for_unequal_allocation() {
    let spec = QuadratureSpec::default();
    let alloc = SpectrumAllocation::new(vec![0.6, 0.48, 0.64]).unwrap();
    for q in [0.5, 5.0, 50.0] {
        let r = check_bridge(&alloc, snr(q), &spec).unwrap();
        assert!(r.max() < 1e-6, "q={q}: {r:?}");
    }
}

#[test]
fn large_wave_count_rates() {
    let spec = QuadratureSpec::default();
    let q = 1.0;
    let mut previous_gap = f64::INFINITY;
    for n in (1..=10).map(|k| 1usize << k) {
        let alloc = SpectrumAllocation::equal(n).unwrap();
        let nf = n as f64;
        let c = cmmse_tone_sum(&alloc, snr(q), &spec).unwrap().value;
        let m = mmse_tone_sum(&alloc, snr(q), &spec).unwrap().value;
        let causal_rate = nf * (1.0 - c);
        let smooth_rate = nf * (1.0 - m);
        // The Gaussian part dominates: N(1 − MMSE) = (q/2)/(1 + q/2N) up to q³/(16N²).
        let smooth_exact = 0.5 * q / (1.0 + 0.5 * q / nf);
        assert!(
            (smooth_rate - smooth_exact).abs() < 0.07 * q.powi(3) / (nf * nf),
            "N={n}: {smooth_rate}"
        );
        let gap = (causal_rate - 0.25 * q).abs();
        assert!(gap < previous_gap, "N={n}: gap {gap} did not shrink");
        assert!(gap < 0.1 * q * q / nf, "N={n}: gap {gap}");
        previous_gap = gap;
    }
    assert!(previous_gap / 0.25 < 1e-2);
}

#[test]
fn asymptotic_forms_use_estimated_curvature() {
    let spec = QuadratureSpec {
        abs_tol: 1e-16,
        tail_mass_bound: 1e-17,
        ..QuadratureSpec::default()
    };
    let coeffs = estimate_d2_at_zero(&spec, &default_d2_grid()).unwrap();
    let p = asymptotic_errors(snr(1.0), 1024, &coeffs).unwrap();
    let c = cmmse_tone_sum(
        &SpectrumAllocation::equal(1024).unwrap(),
        snr(1.0),
        &QuadratureSpec::default(),
    )
    .unwrap();
    assert!((p.cmmse - c.value).abs() < 1e-6);
    assert!(asymptotic_errors(snr(1.0), 0, &coeffs).is_err());
    // Heavily loaded channels clamp at zero.
    assert_eq!(asymptotic_errors(snr(1e6), 1, &coeffs).unwrap().mmse, 0.0);
}

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.into_iter().map(|x| x / norm).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_allocations_respect_ordering(
        raw in prop::collection::vec(0.05f64..1.0, 1..12),
        q in 0.05f64..200.0,
    ) {
        let spec = QuadratureSpec::default();
        let alloc = SpectrumAllocation::new(normalized(raw)).unwrap();
        let p = tone_error_pair(&alloc, snr(q), &spec).unwrap();
        let slack = p.divergence_error_bound;
        prop_assert!(p.mmse <= p.cmmse + slack);
        prop_assert!(p.cmmse <= 1.0);
        prop_assert!(p.cmmse <= cmmse_gaussian(&alloc, snr(q)) + slack);
        prop_assert!(p.mmse <= mmse_gaussian(&alloc, snr(q)) + slack);
    }

    #[test]
    fn permuting_waves_changes_nothing(raw in prop::collection::vec(0.05f64..1.0, 2..8), q in 0.1f64..50.0) {
        let spec = QuadratureSpec::default();
        let alphas = normalized(raw);
        let mut reversed = alphas.clone();
        reversed.reverse();
        let a = tone_error_pair(&SpectrumAllocation::new(alphas).unwrap(), snr(q), &spec).unwrap();
        let b = tone_error_pair(&SpectrumAllocation::new(reversed).unwrap(), snr(q), &spec).unwrap();
        prop_assert!((a.cmmse - b.cmmse).abs() < 1e-13);
        prop_assert!((a.mmse - b.mmse).abs() < 1e-13);
    }
}
