//! Monte Carlo campaigns over a sweep of active-user counts.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{activity_error, bler, channel_nmse, nmse_db, NmseSupport};
use super::world::{generate_world, trial_rng, World};
use crate::coding::LdpcCode;
use crate::scenario::SystemConfig;
use crate::turbo::{run_receiver, Receiver, ReceiverConfig, ReceiverResult};
use crate::{Error, Result};

/// z-value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Points backed by fewer block errors than this get a warning.
pub const MIN_ERROR_EVENTS: usize = 20;

/// Outcome of one receiver on one world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub receiver: Receiver,
    pub k: usize,
    pub trial: u64,
    pub n_users: usize,
    pub miss_count: usize,
    pub false_alarm_count: usize,
    /// Linear NMSE; absent when the true channel is zero.
    pub nmse: Option<f64>,
    pub block_errors: usize,
    pub blocks_total: usize,
    pub detector_iterations: usize,
    pub clamp_events: u64,
    pub diagnostics: usize,
    pub decoder_calls: usize,
    pub rounds: usize,
    pub wall_s: Option<f64>,
}

impl TrialRecord {
    pub fn activity_error(&self) -> f64 {
        (self.miss_count + self.false_alarm_count) as f64 / self.n_users as f64
    }
}

/// Score a receiver result against the world it was run on.
pub fn score(
    receiver: Receiver,
    trial: u64,
    world: &World,
    result: &ReceiverResult,
    support: NmseSupport,
) -> TrialRecord {
    let (miss, fa, _) = activity_error(&world.activity, &result.detected_set);
    let (errors, total) = bler(&world.activity, &world.payloads, result);
    TrialRecord {
        receiver,
        k: world.activity.n_active(),
        trial,
        n_users: world.activity.n_users(),
        miss_count: miss,
        false_alarm_count: fa,
        nmse: channel_nmse(
            &world.channel.effective,
            &result.channel_estimate,
            &world.activity,
            support,
        ),
        block_errors: errors,
        blocks_total: total,
        detector_iterations: result.detector_iterations,
        clamp_events: result.clamp_events,
        diagnostics: result.diagnostics,
        decoder_calls: result.decoder_calls,
        rounds: result.rounds,
        wall_s: None,
    }
}

/// Receiver configuration for a world: known large-scale fading, activity
/// prior from `cfg`.
pub fn receiver_config(cfg: &SystemConfig, world: &World) -> ReceiverConfig {
    ReceiverConfig::from_system(cfg, world.population.path_gains.clone())
}

/// Run one receiver on a world.
pub fn evaluate(
    receiver: Receiver,
    cfg: &SystemConfig,
    world: &World,
    code: &LdpcCode,
    trace: bool,
) -> Result<ReceiverResult> {
    let mut rcfg = receiver_config(cfg, world);
    rcfg.detector.trace = trace;
    run_receiver(
        receiver,
        &world.received.samples,
        world.pilots.as_matrix(),
        Some(&world.activity),
        code,
        &rcfg,
    )
}

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub config: SystemConfig,
    pub sweep_k: Vec<usize>,
    pub receivers: Vec<Receiver>,
    pub trials: u64,
    pub master_seed: u64,
    /// Record wall-clock time per trial. Off by default so that repeated
    /// runs produce identical files.
    pub timing: bool,
    pub nmse_support: NmseSupport,
}

impl CampaignSpec {
    pub fn new(config: SystemConfig, sweep_k: Vec<usize>, receivers: Vec<Receiver>, trials: u64) -> Self {
        let master_seed = config.master_seed;
        CampaignSpec {
            config,
            sweep_k,
            receivers,
            trials,
            master_seed,
            timing: false,
            nmse_support: NmseSupport::All,
        }
    }
}

/// Aggregate of one `(receiver, K)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub receiver: Receiver,
    pub k: usize,
    pub trials: usize,
    pub activity_err: f64,
    pub activity_err_ci95: f64,
    /// Mean linear NMSE over trials with a non-zero channel.
    pub nmse: f64,
    pub nmse_ci95: f64,
    pub nmse_db: f64,
    pub bler: f64,
    pub bler_ci95: f64,
    pub block_errors: usize,
    pub blocks_total: usize,
    pub diagnostics: usize,
    pub wall_s: Option<f64>,
}

impl PointSummary {
    /// 95% interval of the NMSE in dB.
    pub fn nmse_db_interval(&self) -> (f64, f64) {
        (
            nmse_db(self.nmse - self.nmse_ci95),
            nmse_db(self.nmse + self.nmse_ci95),
        )
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<PointSummary>,
}

fn mean_ci(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0, n);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt(), n)
}

/// Aggregate trial records into one summary per `(receiver, K)`, ordered by
/// `K` and then receiver.
pub fn summarize(records: &[TrialRecord]) -> Vec<PointSummary> {
    let mut keys: Vec<(usize, Receiver)> = records.iter().map(|r| (r.k, r.receiver)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(k, receiver)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.k == k && r.receiver == receiver)
                .collect();
            let (activity_err, activity_err_ci95, _) = mean_ci(group.iter().map(|r| r.activity_error()));
            let (nmse, nmse_ci95, _) = mean_ci(group.iter().filter_map(|r| r.nmse));
            let block_errors: usize = group.iter().map(|r| r.block_errors).sum();
            let blocks_total: usize = group.iter().map(|r| r.blocks_total).sum();
            let bler = if blocks_total > 0 {
                block_errors as f64 / blocks_total as f64
            } else {
                0.0
            };
            let bler_ci95 = if blocks_total > 0 {
                Z95 * (bler * (1.0 - bler) / blocks_total as f64).sqrt()
            } else {
                0.0
            };
            let wall_s = group
                .iter()
                .map(|r| r.wall_s)
                .sum::<Option<f64>>();
            PointSummary {
                receiver,
                k,
                trials: group.len(),
                activity_err,
                activity_err_ci95,
                nmse,
                nmse_ci95,
                nmse_db: nmse_db(nmse),
                bler,
                bler_ci95,
                block_errors,
                blocks_total,
                diagnostics: group.iter().map(|r| r.diagnostics).sum(),
                wall_s,
            }
        })
        .collect()
}

/// All receivers on the world of one `(K, trial)` pair. Every receiver sees
/// the same world, so receiver comparisons are paired.
pub fn run_trial(
    cfg: &SystemConfig,
    code: &LdpcCode,
    receivers: &[Receiver],
    master_seed: u64,
    trial: u64,
    support: NmseSupport,
    timing: bool,
) -> Result<Vec<TrialRecord>> {
    let world = generate_world(cfg, code, &mut trial_rng(master_seed, cfg.n_active, trial))?;
    receivers
        .iter()
        .map(|&receiver| {
            let start = Instant::now();
            let result = evaluate(receiver, cfg, &world, code, false)?;
            let mut record = score(receiver, trial, &world, &result, support);
            if timing {
                record.wall_s = Some(start.elapsed().as_secs_f64());
            }
            Ok(record)
        })
        .collect()
}

/// Run every `(K, receiver)` point of the campaign. Trials run in parallel; the
/// records come back in `(K, trial, receiver)` order regardless.
pub fn run_campaign(spec: &CampaignSpec, code: &LdpcCode) -> Result<Campaign> {
    if spec.trials == 0 {
        return Err(Error::invalid("a campaign needs at least one trial"));
    }
    if spec.receivers.is_empty() {
        return Err(Error::invalid("no receivers selected"));
    }
    let mut records = Vec::new();
    for &k in &spec.sweep_k {
        let cfg = SystemConfig {
            n_active: k,
            ..spec.config.clone()
        };
        cfg.validate()?;
        info!("K = {k}: {} trials x {} receivers", spec.trials, spec.receivers.len());
        let per_trial: Vec<Vec<TrialRecord>> = (0..spec.trials)
            .into_par_iter()
            .map(|trial| {
                run_trial(
                    &cfg,
                    code,
                    &spec.receivers,
                    spec.master_seed,
                    trial,
                    spec.nmse_support,
                    spec.timing,
                )
            })
            .collect::<Result<_>>()?;
        records.extend(per_trial.into_iter().flatten());
    }
    let summary = summarize(&records);
    for p in &summary {
        if p.block_errors < MIN_ERROR_EVENTS {
            warn!(
                "{} at K = {}: only {} block errors, BLER interval is unreliable",
                p.receiver, p.k, p.block_errors
            );
        }
    }
    Ok(Campaign { records, summary })
}
