//! Turbo receiver and the comparison receivers.
//!
//! A round runs the detector with the current symbol priors, turns the
//! symbol posteriors of every detected user into bit LLRs, strips the prior
//! the detector was given, and hands the extrinsic part to the LDPC decoder.
//! The decoder's extrinsic output becomes the next round's symbol prior.

use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::coding::{crc8_check, hard_decision, BpDecoder, LdpcCode};
use crate::detector::{self, DetectorConfig, TraceRow};
use crate::modem::{
    bit_llrs_from_symbol_posteriors, gaussian_symbol_posterior, symbol_priors_from_llrs,
    Constellation, SymbolDistribution,
};
use crate::scenario::{ActivityPattern, SystemConfig};
use crate::{clip_llr, CMatrix, Error, Result, C64};

/// Activity prior handed to the detector by the genie receiver.
pub const GENIE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    Turbo,
    DataAssisted,
    Separate,
    Genie,
}

impl Receiver {
    pub const ALL: [Receiver; 4] = [
        Receiver::Turbo,
        Receiver::DataAssisted,
        Receiver::Separate,
        Receiver::Genie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Receiver::Turbo => "turbo",
            Receiver::DataAssisted => "data_assisted",
            Receiver::Separate => "separate",
            Receiver::Genie => "genie",
        }
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Receiver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "turbo" => Ok(Receiver::Turbo),
            "data_assisted" | "da" => Ok(Receiver::DataAssisted),
            "separate" => Ok(Receiver::Separate),
            "genie" => Ok(Receiver::Genie),
            other => Err(Error::invalid(format!("unknown receiver '{other}'"))),
        }
    }
}

/// Everything a receiver needs besides the observation.
#[derive(Debug, Clone)]
pub struct ReceiverConfig {
    pub detector: DetectorConfig,
    pub turbo_iters: usize,
    pub decoder_iters: usize,
}

impl ReceiverConfig {
    pub fn from_system(cfg: &SystemConfig, betas: Vec<f64>) -> Self {
        ReceiverConfig {
            detector: DetectorConfig::from_system(cfg, betas),
            turbo_iters: cfg.turbo_iters,
            decoder_iters: cfg.decoder_iters,
        }
    }
}

/// Soft information of one turbo round, kept for inspection.
#[derive(Debug, Clone, Default)]
pub struct TurboState {
    pub iteration: usize,
    pub symbol_priors: Vec<SymbolDistribution>,
    /// Per user: L_E^a, L_E^p, L_D^a (= L_E^e), L_D^p, L_D^e. Empty for
    /// users not detected in this round.
    pub detector_priors: Vec<Vec<f64>>,
    pub detector_posteriors: Vec<Vec<f64>>,
    pub decoder_priors: Vec<Vec<f64>>,
    pub decoder_posteriors: Vec<Vec<f64>>,
    pub decoder_extrinsics: Vec<Vec<f64>>,
    pub detected_set: Vec<usize>,
    pub crc_pass_set: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ReceiverResult {
    pub detected_set: Vec<usize>,
    pub crc_pass_set: Vec<usize>,
    /// Payload bits (CRC stripped), aligned with `crc_pass_set`.
    pub decoded_payloads: Vec<Vec<u8>>,
    pub channel_estimate: CMatrix,
    pub rounds: usize,
    pub decoder_calls: usize,
    pub detector_iterations: usize,
    pub clamp_events: u64,
    /// Detector runs that diverged on both attempts.
    pub diagnostics: usize,
    /// Snapshot of each round when requested.
    pub history: Vec<TurboState>,
    /// Detector trace of each round, when the detector traces.
    pub traces: Vec<Vec<TraceRow>>,
}

impl ReceiverResult {
    fn empty(m: usize, n: usize) -> Self {
        ReceiverResult {
            detected_set: Vec::new(),
            crc_pass_set: Vec::new(),
            decoded_payloads: Vec::new(),
            channel_estimate: CMatrix::from_element(m, n, C64::new(0.0, 0.0)),
            rounds: 0,
            decoder_calls: 0,
            detector_iterations: 0,
            clamp_events: 0,
            diagnostics: 0,
            history: Vec::new(),
            traces: Vec::new(),
        }
    }

    /// Payload decoded for `user`, if it passed CRC.
    pub fn payload_of(&self, user: usize) -> Option<&[u8]> {
        self.crc_pass_set
            .binary_search(&user)
            .ok()
            .map(|i| self.decoded_payloads[i].as_slice())
    }

    /// Block outcome of a truly active user against its transmitted payload.
    pub fn block_ok(&self, user: usize, payload: &[u8]) -> bool {
        self.payload_of(user) == Some(payload)
    }
}

/// Hard decision and CRC screen of one user's decoder posterior.
fn decide(code: &LdpcCode, posterior: &[f64]) -> Option<Vec<u8>> {
    let block = code.extract_info(&hard_decision(posterior));
    crc8_check(&block).then(|| block.payload().to_vec())
}

fn check_shapes(y: &CMatrix, pilots: &CMatrix, code: &LdpcCode) -> Result<usize> {
    let bps = Constellation::qpsk().bits_per_symbol();
    let data_len = y.ncols().checked_sub(pilots.ncols()).unwrap_or(0);
    if pilots.ncols() == 0 || pilots.ncols() > y.ncols() {
        return Err(Error::invalid("pilot length exceeds block length"));
    }
    if data_len * bps != code.n() {
        return Err(Error::invalid(format!(
            "{data_len} data symbols carry {} coded bits, code length is {}",
            data_len * bps,
            code.n()
        )));
    }
    Ok(data_len)
}

/// The turbo receiver with `cfg.turbo_iters` rounds.
pub fn run_turbo(
    y: &CMatrix,
    pilots: &CMatrix,
    code: &LdpcCode,
    cfg: &ReceiverConfig,
) -> Result<ReceiverResult> {
    turbo_loop(y, pilots, code, cfg, false)
}

/// Like [`run_turbo`], also returning the soft information of every round.
pub fn run_turbo_with_history(
    y: &CMatrix,
    pilots: &CMatrix,
    code: &LdpcCode,
    cfg: &ReceiverConfig,
) -> Result<ReceiverResult> {
    turbo_loop(y, pilots, code, cfg, true)
}

fn turbo_loop(
    y: &CMatrix,
    pilots: &CMatrix,
    code: &LdpcCode,
    cfg: &ReceiverConfig,
    keep_history: bool,
) -> Result<ReceiverResult> {
    let data_len = check_shapes(y, pilots, code)?;
    let n_users = pilots.nrows();
    let qpsk = Constellation::qpsk();
    let decoder = BpDecoder::new(code.parity_check(), cfg.decoder_iters);
    let mut priors = detector::uniform_priors(n_users, data_len);
    let mut l_ea: Vec<Vec<f64>> = vec![vec![0.0; code.n()]; n_users];
    let mut result = ReceiverResult::empty(y.nrows(), n_users);

    for round in 1..=cfg.turbo_iters.max(1) {
        let det = detector::run(y, pilots, &priors, &cfg.detector)?;
        result.rounds = round;
        result.detector_iterations += det.iterations;
        result.clamp_events += det.clamp_events;
        result.diagnostics += usize::from(det.diverged);
        result.channel_estimate = det.channel_estimate;
        if !det.trace.is_empty() {
            result.traces.push(det.trace);
        }

        let mut state = TurboState {
            iteration: round,
            ..Default::default()
        };
        if keep_history {
            state.symbol_priors = priors.clone();
            for v in [
                &mut state.detector_priors,
                &mut state.detector_posteriors,
                &mut state.decoder_priors,
                &mut state.decoder_posteriors,
                &mut state.decoder_extrinsics,
            ] {
                *v = vec![Vec::new(); n_users];
            }
        }

        let mut pass = Vec::new();
        let mut payloads = Vec::new();
        for (&n, eta) in det.active_set.iter().zip(&det.symbol_posteriors) {
            let le_p = bit_llrs_from_symbol_posteriors(eta, &qpsk);
            let ld_a: Vec<f64> = le_p.iter().zip(&l_ea[n]).map(|(p, a)| p - a).collect();
            let out = decoder.decode(&ld_a);
            result.decoder_calls += 1;
            let ld_e: Vec<f64> = out
                .posterior
                .iter()
                .zip(&ld_a)
                .map(|(p, a)| p - a)
                .collect();
            let clipped: Vec<f64> = ld_e.iter().map(|&l| clip_llr(l)).collect();
            priors[n] = symbol_priors_from_llrs(&clipped, &qpsk);
            if let Some(bits) = decide(code, &out.posterior) {
                pass.push(n);
                payloads.push(bits);
            }
            if keep_history {
                state.detector_priors[n] = l_ea[n].clone();
                state.detector_posteriors[n] = le_p;
                state.decoder_priors[n] = ld_a;
                state.decoder_posteriors[n] = out.posterior;
                state.decoder_extrinsics[n] = ld_e;
            }
            l_ea[n] = clipped;
        }

        let all_pass = pass.len() == det.active_set.len();
        result.detected_set = det.active_set;
        result.crc_pass_set = pass;
        result.decoded_payloads = payloads;
        if keep_history {
            state.detected_set = result.detected_set.clone();
            state.crc_pass_set = result.crc_pass_set.clone();
            result.history.push(state);
        }
        if all_pass {
            debug!("turbo exit after round {round}: all detected users pass CRC");
            break;
        }
    }
    Ok(result)
}

/// BiG-AMP detection followed by a single decoding pass.
pub fn baseline_data_assisted(
    y: &CMatrix,
    pilots: &CMatrix,
    code: &LdpcCode,
    cfg: &ReceiverConfig,
) -> Result<ReceiverResult> {
    let cfg = ReceiverConfig {
        turbo_iters: 1,
        ..cfg.clone()
    };
    run_turbo(y, pilots, code, &cfg)
}

/// Turbo receiver told the true activity pattern.
pub fn genie_turbo(
    y: &CMatrix,
    pilots: &CMatrix,
    truth: &ActivityPattern,
    code: &LdpcCode,
    cfg: &ReceiverConfig,
) -> Result<ReceiverResult> {
    if truth.n_users() != pilots.nrows() {
        return Err(Error::invalid("activity pattern size differs from user count"));
    }
    if truth.n_active() == 0 {
        check_shapes(y, pilots, code)?;
        return Ok(ReceiverResult::empty(y.nrows(), pilots.nrows()));
    }
    let mut cfg = cfg.clone();
    cfg.detector.lambda = (0..truth.n_users())
        .map(|n| {
            if truth.is_active(n) {
                1.0 - GENIE_EPS
            } else {
                GENIE_EPS
            }
        })
        .collect();
    cfg.detector.active_override = Some(truth.active_set.clone());
    run_turbo(y, pilots, code, &cfg)
}

/// Pilot-only activity detection and channel estimation, linear MMSE
/// equalisation of the data phase, then one decoding pass.
pub fn baseline_separate(
    y: &CMatrix,
    pilots: &CMatrix,
    code: &LdpcCode,
    cfg: &ReceiverConfig,
) -> Result<ReceiverResult> {
    let data_len = check_shapes(y, pilots, code)?;
    let (m, n_users, l) = (y.nrows(), pilots.nrows(), pilots.ncols());
    let y_pilot = y.columns(0, l).into_owned();
    let no_data = detector::uniform_priors(n_users, 0);
    let det = detector::run(&y_pilot, pilots, &no_data, &cfg.detector)?;

    let mut result = ReceiverResult::empty(m, n_users);
    result.rounds = 1;
    result.detector_iterations = det.iterations;
    result.clamp_events = det.clamp_events;
    result.diagnostics = usize::from(det.diverged);
    result.channel_estimate = det.channel_estimate;
    result.detected_set = det.active_set;
    if !det.trace.is_empty() {
        result.traces.push(det.trace);
    }
    if result.detected_set.is_empty() {
        return Ok(result);
    }

    let y_data = y.columns(l, data_len).into_owned();
    let equalized = mmse_equalize(
        &result.channel_estimate,
        &result.detected_set,
        &y_data,
        cfg.detector.tx_power,
        cfg.detector.noise_var,
    );
    let qpsk = Constellation::qpsk();
    let decoder = BpDecoder::new(code.parity_check(), cfg.decoder_iters);
    let mut probs = vec![0.0; qpsk.len()];
    let uniform = vec![1.0 / qpsk.len() as f64; qpsk.len()];
    for (k, &n) in result.detected_set.iter().enumerate() {
        let mut dist = SymbolDistribution::uniform(data_len, qpsk.len());
        for t in 0..data_len {
            gaussian_symbol_posterior(
                equalized.symbols[(k, t)],
                equalized.noise_var[k],
                &uniform,
                &qpsk,
                &mut probs,
            );
            dist.get_mut(t).copy_from_slice(&probs);
        }
        let llr = bit_llrs_from_symbol_posteriors(&dist, &qpsk);
        let out = decoder.decode(&llr);
        result.decoder_calls += 1;
        if let Some(bits) = decide(code, &out.posterior) {
            result.crc_pass_set.push(n);
            result.decoded_payloads.push(bits);
        }
    }
    Ok(result)
}

/// Output of [`mmse_equalize`]: bias-removed symbol estimates (`K x T_d`)
/// and the residual noise variance per equalised user.
#[derive(Debug, Clone)]
pub struct Equalized {
    pub symbols: CMatrix,
    pub noise_var: Vec<f64>,
}

/// Per-column linear MMSE estimate of the symbols of `users` from
/// `y = sqrt(gamma) H x + CN(0, noise_var)`, assuming unit-power symbols.
/// The raw estimate `mu_k x_k + e_k` is divided by `mu_k`, leaving noise of
/// variance `(1 - mu_k) / mu_k`.
pub fn mmse_equalize(
    h: &CMatrix,
    users: &[usize],
    y: &CMatrix,
    tx_power: f64,
    noise_var: f64,
) -> Equalized {
    let k = users.len();
    let scale = (tx_power / noise_var).sqrt();
    let hs = CMatrix::from_fn(h.nrows(), k, |m, j| h[(m, users[j])] * scale);
    let hh = hs.adjoint();
    let gram = &hh * &hs + CMatrix::identity(k, k);
    // Hermitian positive definite by construction
    let chol = gram
        .cholesky()
        .expect("identity-regularised Gram matrix is positive definite");
    let w = chol.solve(&hh);
    let mu: Vec<f64> = (0..k)
        .map(|j| (w.row(j) * hs.column(j))[(0, 0)].re.clamp(1e-12, 1.0 - 1e-12))
        .collect();
    let raw = &w * y.map(|v| v / noise_var.sqrt());
    let symbols = CMatrix::from_fn(k, y.ncols(), |j, t| raw[(j, t)] / mu[j]);
    Equalized {
        symbols,
        noise_var: mu.iter().map(|m| (1.0 - m) / m).collect(),
    }
}

/// Dispatch by receiver kind. `truth` is required for the genie.
pub fn run_receiver(
    receiver: Receiver,
    y: &CMatrix,
    pilots: &CMatrix,
    truth: Option<&ActivityPattern>,
    code: &LdpcCode,
    cfg: &ReceiverConfig,
) -> Result<ReceiverResult> {
    match receiver {
        Receiver::Turbo => run_turbo(y, pilots, code, cfg),
        Receiver::DataAssisted => baseline_data_assisted(y, pilots, code, cfg),
        Receiver::Separate => baseline_separate(y, pilots, code, cfg),
        Receiver::Genie => {
            let truth = truth.ok_or_else(|| Error::invalid("genie receiver needs the truth"))?;
            genie_turbo(y, pilots, truth, code, cfg)
        }
    }
}
