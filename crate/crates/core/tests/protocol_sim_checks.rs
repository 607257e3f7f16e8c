use proptest::prelude::*;
use secdeliv_core::protocol_sim::*;
use secdeliv_core::secrecy_analysis::{
    cdf_t_e, lambda_slot_failure, omega_outage, public_packet_pmf, DeliveryModel,
};
use secdeliv_core::{EveScenario, ImageSpec, SystemConfig, TxParams};

fn tx() -> TxParams {
    TxParams {
        zeta: 0.5,
        p_p: 1000.0,
        p_s: 1000.0,
        nu: 6.0,
        l_s: 10,
    }
}

fn img() -> ImageSpec {
    ImageSpec {
        n_roi: 60,
        n_bg: 40,
        d_lim: 30,
    }
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (at(a, i) - at(b, i)).abs()).sum::<f64>()
}

#[test]
fn payloads_survive_every_completed_delivery() {
    let cfg = SystemConfig::reference();
    let settings = SimSettings {
        payload_bytes: Some(16),
        horizon: Some(400),
        ..SimSettings::default()
    };
    for (t, sc) in [(tx(), EveScenario::nce()), (TxParams { nu: 8.0, l_s: 6, ..tx() }, EveScenario::ce())] {
        let out = simulate_trials(&cfg, &t, &img(), &sc, &settings, 300, 21).unwrap();
        let done: Vec<_> = out.iter().filter(|o| o.t_d.is_some()).collect();
        assert!(done.len() > 250, "{}", done.len());
        assert!(done.iter().all(|o| o.payloads_ok == Some(true)));
    }
}

#[test]
fn slot_accounting() {
    let cfg = SystemConfig::reference();
    let out = simulate_trials(&cfg, &tx(), &img(), &EveScenario::nce(), &SimSettings::default(), 2000, 4).unwrap();
    let d = img().d_lim;
    for o in &out {
        let used = o.slots_public + o.slots_confidential + o.slots_idle;
        assert_eq!(used, o.t_d.map_or(d, |t| t.min(d)));
        assert_eq!(o.delay_violated, o.t_d.is_none_or(|t| t > d));
        assert_eq!(o.intercepted_in_time, o.intercepted_by(d));
        if let (Some(e), Some(t)) = (o.t_e, o.t_d) {
            assert!(e <= t, "eavesdroppers are only counted while the delivery runs");
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = SystemConfig::reference();
    let run = || simulate_trials(&cfg, &tx(), &img(), &EveScenario::ce(), &SimSettings::default(), 500, 77).unwrap();
    assert_eq!(run(), run());
    let a = simulate_trials(&cfg, &tx(), &img(), &EveScenario::ce(), &SimSettings::default(), 200, 77).unwrap();
    // Trial i depends only on (seed, i).
    assert_eq!(&run()[..200], &a[..]);
}

#[test]
fn slot_frequencies_match_closed_forms() {
    let cfg = SystemConfig::reference();
    let t = TxParams { nu: 4.0, l_s: 12, ..tx() };
    for sc in [EveScenario::nce(), EveScenario::ce()] {
        let st = slot_statistics(&cfg, &t, &sc, &SimSettings::default(), 1_000_000, 8).unwrap();
        let pmf = public_packet_pmf(&cfg, &t).unwrap();
        let d = tv(&st.public_pmf(), &pmf);
        assert!(d < 0.01, "public pmf tv {d}");
        let om = omega_outage(&cfg, &t).unwrap();
        assert!((st.omega() - om).abs() < 0.005, "{} vs {om}", st.omega());
        let lam = lambda_slot_failure(&cfg, &t, &sc).unwrap();
        assert!((st.lambda() - lam).abs() < 0.005, "{:?}: {} vs {lam}", sc.combining, st.lambda());
    }
}

#[test]
fn capture_time_matches_closed_form() {
    let cfg = SystemConfig::reference();
    let t = TxParams { nu: 4.0, l_s: 12, ..tx() };
    for sc in [EveScenario::nce(), EveScenario::ce()] {
        let te = sample_eve_capture_times(&cfg, &t, &img(), &sc, &SimSettings::default(), 200, 50_000, 5).unwrap();
        let mut worst: f64 = 0.0;
        for k in 1..60 {
            let emp = te.iter().filter(|x| x.is_some_and(|v| v <= k)).count() as f64 / te.len() as f64;
            worst = worst.max((emp - cdf_t_e(&cfg, &t, &img(), &sc, k).unwrap()).abs());
        }
        assert!(worst < 0.01, "{:?}: {worst}", sc.combining);
    }
}

#[test]
fn delivery_time_exact_without_background() {
    // No background and nu = 0: every slot is confidential and the delivery
    // time is N_roi/L_s successes plus negative-binomial outages, exactly.
    let cfg = SystemConfig::reference();
    let t = TxParams { zeta: 0.3, nu: 0.0, l_s: 20, ..tx() };
    let img = ImageSpec { n_roi: 60, n_bg: 0, d_lim: 30 };
    let settings = SimSettings { horizon: Some(300), ..SimSettings::default() };
    let out = simulate_trials(&cfg, &t, &img, &EveScenario::nce(), &settings, 100_000, 3).unwrap();
    let mut hist = vec![0.0; 301];
    for o in &out {
        hist[o.t_d.expect("completes within the horizon")] += 1.0 / out.len() as f64;
    }
    let m = DeliveryModel::new(&cfg, &t, &img).unwrap();
    let pmf: Vec<f64> = (0..=300).map(|k| m.pmf(k)).collect();
    assert!(omega_outage(&cfg, &t).unwrap() > 0.05);
    let d = tv(&hist, &pmf);
    assert!(d < 0.01, "{d}");
}

#[test]
fn fip_falls_with_antennas() {
    let mut fip = Vec::new();
    for n_t in [2, 4, 8] {
        let cfg = SystemConfig { n_t, ..SystemConfig::reference() };
        let t = TxParams { nu: 3.0, l_s: 12, ..tx() };
        let out = simulate_trials(&cfg, &t, &img(), &EveScenario::nce(), &SimSettings::default(), 20_000, 6).unwrap();
        fip.push(fip_from(&out, img().d_lim, 6).value);
    }
    assert!(fip.windows(2).all(|w| w[1] <= w[0]), "{fip:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn estimate_standard_error(hits in 0usize..1000, extra in 0usize..1000) {
        let trials = hits + extra + 1;
        let e = McEstimate::from_counts(hits, trials, 0);
        prop_assert!((0.0..=1.0).contains(&e.value));
        prop_assert!((e.std_err - (e.value * (1.0 - e.value) / trials as f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stream_ledgers_partition(first in 0usize..50, len in 1usize..40, l in 1usize..12, seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut led = StreamLedger::new(first, len);
        while !led.is_complete() {
            let frame = fountain_encode(&led, l).unwrap().unwrap();
            fountain_decode_frame(&mut led, &frame, rng.random_bool(0.6));
            let mut all: Vec<usize> = led.recovered().iter().chain(led.unrecovered()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (first..first + len).collect::<Vec<_>>());
        }
        prop_assert!(fountain_encode(&led, l).unwrap().is_none());
    }
}
