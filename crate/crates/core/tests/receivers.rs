use turbo_ra::coding::LdpcCode;
use turbo_ra::harness::{generate_world, receiver_config, trial_rng, World};
use turbo_ra::scenario::{ActivityPattern, SystemConfig};
use turbo_ra::turbo::{
    baseline_data_assisted, baseline_separate, genie_turbo, mmse_equalize, run_receiver,
    run_turbo, run_turbo_with_history, Receiver, ReceiverConfig,
};
use turbo_ra::{clip_llr, CMatrix, C64};

fn world(k: usize, trial: u64, tweak: impl FnOnce(&mut SystemConfig)) -> (SystemConfig, World, LdpcCode) {
    let code = LdpcCode::default_code();
    let mut cfg = SystemConfig::reduced();
    cfg.n_active = k;
    tweak(&mut cfg);
    let w = generate_world(&cfg, &code, &mut trial_rng(99, k, trial)).unwrap();
    (cfg, w, code)
}

fn rcfg(cfg: &SystemConfig, w: &World) -> ReceiverConfig {
    receiver_config(cfg, w)
}

#[test]
fn single_round_turbo_is_data_assisted() {
    let (cfg, w, code) = world(20, 3, |_| {});
    let mut rc = rcfg(&cfg, &w);
    let da = baseline_data_assisted(&w.received.samples, w.pilots.as_matrix(), &code, &rc).unwrap();
    rc.turbo_iters = 1;
    let t1 = run_turbo(&w.received.samples, w.pilots.as_matrix(), &code, &rc).unwrap();
    assert_eq!(da.detected_set, t1.detected_set);
    assert_eq!(da.crc_pass_set, t1.crc_pass_set);
    assert_eq!(da.decoded_payloads, t1.decoded_payloads);
    assert_eq!(da.channel_estimate, t1.channel_estimate);
}

#[test]
fn noiseless_single_user_decodes_in_one_round() {
    let (cfg, w, code) = world(1, 0, |c| c.noise_power_dbm = Some(-160.0));
    let r = run_turbo(&w.received.samples, w.pilots.as_matrix(), &code, &rcfg(&cfg, &w)).unwrap();
    let user = w.activity.active_set[0];
    assert_eq!(r.detected_set, vec![user]);
    assert_eq!(r.crc_pass_set, vec![user]);
    assert_eq!(r.payload_of(user).unwrap(), &w.payloads[0][..]);
    assert_eq!(r.rounds, 1);
}

#[test]
fn zero_signal_gives_empty_result() {
    let (cfg, w, code) = world(5, 1, |_| {});
    let y = CMatrix::zeros(w.received.samples.nrows(), w.received.samples.ncols());
    let rc = rcfg(&cfg, &w);
    for receiver in [Receiver::Turbo, Receiver::DataAssisted, Receiver::Separate] {
        let r = run_receiver(receiver, &y, w.pilots.as_matrix(), None, &code, &rc).unwrap();
        assert!(r.detected_set.is_empty(), "{receiver}");
        assert!(r.crc_pass_set.is_empty() && r.decoded_payloads.is_empty());
    }
}

#[test]
fn extrinsic_chain_identities() {
    let (cfg, w, code) = world(30, 2, |_| {});
    let r = run_turbo_with_history(&w.received.samples, w.pilots.as_matrix(), &code, &rcfg(&cfg, &w))
        .unwrap();
    assert!(!r.history.is_empty());
    for (q, state) in r.history.iter().enumerate() {
        for &n in &state.detected_set {
            let (le_a, le_p) = (&state.detector_priors[n], &state.detector_posteriors[n]);
            let (ld_a, ld_p, ld_e) = (
                &state.decoder_priors[n],
                &state.decoder_posteriors[n],
                &state.decoder_extrinsics[n],
            );
            for j in 0..code.n() {
                // L_E^e is what the decoder receives
                assert!((ld_a[j] + le_a[j] - le_p[j]).abs() < 1e-12);
                assert!((ld_e[j] + ld_a[j] - ld_p[j]).abs() < 1e-12);
                if q == 0 {
                    assert_eq!(le_a[j], 0.0);
                    assert_eq!(ld_a[j], le_p[j]);
                }
            }
            if q > 0 {
                // L_E^a of this round is the previous round's decoder extrinsic
                let prev = &r.history[q - 1];
                if prev.detected_set.contains(&n) {
                    let expect: Vec<f64> = prev.decoder_extrinsics[n].iter().map(|&l| clip_llr(l)).collect();
                    assert_eq!(le_a, &expect);
                }
            }
        }
        assert!(state.crc_pass_set.iter().all(|n| state.detected_set.contains(n)));
    }
}

#[test]
fn undetected_users_keep_their_priors() {
    let (cfg, w, code) = world(30, 2, |_| {});
    let mut rc = rcfg(&cfg, &w);
    rc.turbo_iters = 3;
    let r = run_turbo_with_history(&w.received.samples, w.pilots.as_matrix(), &code, &rc).unwrap();
    for q in 1..r.history.len() {
        let (prev, cur) = (&r.history[q - 1], &r.history[q]);
        for n in 0..cfg.n_users {
            if !prev.detected_set.contains(&n) {
                assert_eq!(cur.symbol_priors[n], prev.symbol_priors[n], "user {n} round {q}");
            }
        }
    }
    // uniform in the first round
    let first = &r.history[0].symbol_priors;
    assert!(first.iter().all(|d| d.iter().all(|p| p.iter().all(|&x| (x - 0.25).abs() < 1e-15))));
}

#[test]
fn more_rounds_never_fewer_decoder_calls() {
    let (cfg, w, code) = world(30, 5, |_| {});
    let mut rc = rcfg(&cfg, &w);
    let mut prev = 0;
    for q in 1..=3 {
        rc.turbo_iters = q;
        let r = run_turbo(&w.received.samples, w.pilots.as_matrix(), &code, &rc).unwrap();
        assert!(r.decoder_calls >= prev || r.rounds < q);
        prev = r.decoder_calls;
    }
}

#[test]
fn separate_receiver_is_deterministic() {
    let (cfg, w, code) = world(15, 4, |_| {});
    let rc = rcfg(&cfg, &w);
    let a = baseline_separate(&w.received.samples, w.pilots.as_matrix(), &code, &rc).unwrap();
    let b = baseline_separate(&w.received.samples, w.pilots.as_matrix(), &code, &rc).unwrap();
    assert_eq!(a.detected_set, b.detected_set);
    assert_eq!(a.decoded_payloads, b.decoded_payloads);
    assert_eq!(a.channel_estimate, b.channel_estimate);
    assert!(a.crc_pass_set.iter().all(|n| a.detected_set.contains(n)));
}

#[test]
fn mmse_reaches_zero_forcing_limit() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let (m, n, k, t) = (8, 6, 3, 20);
    let h = CMatrix::from_fn(m, n, |_, _| turbo_ra::scenario::complex_gaussian(&mut rng, 1.0));
    let users = [1, 3, 4];
    let qpsk = turbo_ra::modem::Constellation::qpsk();
    let x = CMatrix::from_fn(k, t, |_, _| qpsk.points()[rng.random_range(0..4)]);
    let hk = CMatrix::from_fn(m, k, |a, j| h[(a, users[j])]);
    let gamma = 2.0;
    let y = (&hk * &x) * C64::from(f64::sqrt(gamma));
    let eq = mmse_equalize(&h, &users, &y, gamma, 1e-14);
    for j in 0..k {
        for c in 0..t {
            assert!((eq.symbols[(j, c)] - x[(j, c)]).norm() < 1e-6);
        }
        assert!(eq.noise_var[j] < 1e-9);
    }
}

#[test]
fn genie_uses_the_true_set() {
    let (cfg, w, code) = world(25, 6, |_| {});
    let rc = rcfg(&cfg, &w);
    let r = genie_turbo(&w.received.samples, w.pilots.as_matrix(), &w.activity, &code, &rc).unwrap();
    assert_eq!(r.detected_set, w.activity.active_set);

    let none = ActivityPattern::from_active_set(cfg.n_users, vec![]).unwrap();
    let r = genie_turbo(&w.received.samples, w.pilots.as_matrix(), &none, &code, &rc).unwrap();
    assert!(r.detected_set.is_empty() && r.decoded_payloads.is_empty());
    assert!(run_receiver(Receiver::Genie, &w.received.samples, w.pilots.as_matrix(), None, &code, &rc).is_err());
}

#[test]
fn shape_mismatch_is_rejected() {
    let (cfg, w, code) = world(5, 0, |_| {});
    let rc = rcfg(&cfg, &w);
    let short = w.received.samples.columns(0, 100).into_owned();
    assert!(run_turbo(&short, w.pilots.as_matrix(), &code, &rc).is_err());
}

#[test]
fn receiver_names_round_trip() {
    for r in Receiver::ALL {
        assert_eq!(r.name().parse::<Receiver>().unwrap(), r);
    }
    assert_eq!("data-assisted".parse::<Receiver>().unwrap(), Receiver::DataAssisted);
    assert!("mystery".parse::<Receiver>().is_err());
}
