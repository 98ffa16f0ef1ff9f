//! Per-trial measurands.

use crate::scenario::ActivityPattern;
use crate::turbo::ReceiverResult;
use crate::CMatrix;

/// Floor used when an NMSE of zero is reported in dB.
pub const NMSE_FLOOR_DB: f64 = -100.0;

/// `(misses, false alarms, (misses + false alarms) / N)`.
pub fn activity_error(truth: &ActivityPattern, detected: &[usize]) -> (usize, usize, f64) {
    let n = truth.n_users();
    let mut flagged = vec![false; n];
    for &u in detected {
        flagged[u] = true;
    }
    let false_alarm = flagged
        .iter()
        .enumerate()
        .filter(|&(u, &f)| f && !truth.is_active(u))
        .count();
    let miss = truth.active_set.iter().filter(|&&u| !flagged[u]).count();
    (miss, false_alarm, (miss + false_alarm) as f64 / n as f64)
}

/// Which columns enter the NMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmseSupport {
    #[default]
    All,
    ActiveOnly,
}

/// `||H_hat - H||^2 / ||H||^2`; `None` when `H` is zero on the support.
pub fn channel_nmse(
    truth: &CMatrix,
    estimate: &CMatrix,
    activity: &ActivityPattern,
    support: NmseSupport,
) -> Option<f64> {
    assert_eq!(truth.shape(), estimate.shape(), "channel shapes");
    let (mut err, mut energy) = (0.0, 0.0);
    for n in 0..truth.ncols() {
        if support == NmseSupport::ActiveOnly && !activity.is_active(n) {
            continue;
        }
        for m in 0..truth.nrows() {
            err += (estimate[(m, n)] - truth[(m, n)]).norm_sqr();
            energy += truth[(m, n)].norm_sqr();
        }
    }
    (energy > 0.0).then(|| err / energy)
}

/// Linear ratio in dB, floored at [`NMSE_FLOOR_DB`].
pub fn nmse_db(nmse: f64) -> f64 {
    if nmse > 0.0 {
        (10.0 * nmse.log10()).max(NMSE_FLOOR_DB)
    } else {
        NMSE_FLOOR_DB
    }
}

/// `(block errors, blocks)` over truly active users. A user counts as an
/// error unless it passed CRC with exactly the transmitted payload.
pub fn bler(truth: &ActivityPattern, payloads: &[Vec<u8>], result: &ReceiverResult) -> (usize, usize) {
    let errors = truth
        .active_set
        .iter()
        .zip(payloads)
        .filter(|(&u, p)| !result.block_ok(u, p))
        .count();
    (errors, truth.n_active())
}
