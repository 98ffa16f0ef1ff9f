//! BiG-AMP detector for joint activity detection, channel estimation and
//! soft symbol detection.
//!
//! Internally everything runs in noise-normalised units: `y' = y / sigma`,
//! `beta' = gamma beta / sigma^2`, so the observation model becomes
//! `y' = H' X + CN(0, 1)` with `H' = sqrt(gamma) H / sigma`. The channel
//! estimate is converted back before it leaves [`run`].
//!
//! Pseudo-observations of `h_mn` and `x_nt` are carried in information form
//! (precision and precision-weighted mean). Summing the pilot and data
//! phases is then a plain addition and a user with no evidence has zero
//! precision instead of an infinite variance.

pub mod steps;

use std::io::Write;

use log::{debug, warn};

use crate::modem::{posterior_from_information, Constellation, SymbolDistribution};
use crate::scenario::SystemConfig;
use crate::{CMatrix, Error, RMatrix, Result, C64};

use steps::{activity_evidence, bg_denoise_information, logistic, logit};

/// Lower bound applied to `V^p` before it is used as a divisor.
pub const VAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    /// Prior activity probability per user.
    pub lambda: Vec<f64>,
    /// Large-scale fading per user (linear power gain).
    pub betas: Vec<f64>,
    pub theta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub damping: f64,
    pub warmup_pilot_iters: usize,
    pub tx_power: f64,
    pub noise_var: f64,
    /// Report this set instead of thresholding `mean_rho`.
    pub active_override: Option<Vec<usize>>,
    pub trace: bool,
}

impl DetectorConfig {
    pub fn from_system(cfg: &SystemConfig, betas: Vec<f64>) -> Self {
        DetectorConfig {
            lambda: vec![cfg.activity_prior(); betas.len()],
            betas,
            theta: cfg.threshold,
            max_iters: cfg.detector_iters,
            tol: cfg.detector_tol,
            damping: cfg.damping,
            warmup_pilot_iters: cfg.warmup_pilot_iters,
            tx_power: cfg.tx_power(),
            noise_var: cfg.noise_var(),
            active_override: None,
            trace: false,
        }
    }

    pub fn validate(&self, n_users: usize) -> Result<()> {
        if self.lambda.len() != n_users || self.betas.len() != n_users {
            return Err(Error::invalid(format!(
                "lambda/betas have {}/{} entries for {n_users} users",
                self.lambda.len(),
                self.betas.len()
            )));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::invalid(format!("lambda {l} outside (0, 1)")));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::invalid(format!("beta {b} must be positive")));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta {} outside [0, 1]", self.theta)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.tx_power > 0.0 && self.noise_var > 0.0) {
            return Err(Error::invalid("tx_power and noise_var must be positive"));
        }
        if let Some(set) = &self.active_override {
            if set.iter().any(|&n| n >= n_users) {
                return Err(Error::invalid("active_override index out of range"));
            }
        }
        Ok(())
    }
}

/// Message state of one detector run, in normalised units.
#[derive(Debug, Clone)]
pub struct DetectorState {
    pub h_hat: CMatrix,
    pub v_h: RMatrix,
    pub x_hat: CMatrix,
    pub v_x: RMatrix,
    pub s_hat: CMatrix,
    pub v_s: RMatrix,
    pub mp: CMatrix,
    pub vp: RMatrix,
    pub z_hat: CMatrix,
    pub v_z: RMatrix,
    pub rho: RMatrix,
    pub rho_tilde: RMatrix,
    /// Plain mixing estimate `H_hat X_hat` of the last pass, the quantity
    /// the stopping rule watches.
    pub p_bar: CMatrix,
    /// Symbol posteriors over the data phase, one per user.
    pub eta: Vec<SymbolDistribution>,
    /// Iterations performed, warm-up included.
    pub iter: usize,
    pub clamp_events: u64,
    /// Columns `0..updated_cols` have been through at least one update.
    updated_cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub warmup: bool,
    pub ratio: f64,
    pub mean_vp: f64,
    pub clamp_events: u64,
    pub mean_rho: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DetectorOutput {
    pub active_set: Vec<usize>,
    /// Data-phase symbol posteriors, aligned with `active_set`.
    pub symbol_posteriors: Vec<SymbolDistribution>,
    /// Channel estimate in physical units, `M x N`.
    pub channel_estimate: CMatrix,
    pub mean_rho: Vec<f64>,
    /// Main-loop iterations of the accepted attempt.
    pub iterations: usize,
    pub converged: bool,
    pub clamp_events: u64,
    /// The output comes from the repeat at half damping.
    pub retried: bool,
    /// Both attempts diverged; the output carries no detections.
    pub diverged: bool,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub ratio: f64,
    pub finite: bool,
}

/// A detector problem bound to its observation and priors.
pub struct Detector<'a> {
    y: CMatrix,
    pilots: &'a CMatrix,
    priors: &'a [SymbolDistribution],
    cfg: &'a DetectorConfig,
    betas: Vec<f64>,
    logit_lambda: Vec<f64>,
    constellation: Constellation,
}

impl<'a> Detector<'a> {
    /// `y` is `M x T`, `pilots` is `N x L`, `priors` holds one distribution
    /// over the `T - L` data positions per user.
    pub fn new(
        y: &CMatrix,
        pilots: &'a CMatrix,
        priors: &'a [SymbolDistribution],
        cfg: &'a DetectorConfig,
    ) -> Result<Self> {
        let n = pilots.nrows();
        let (l, t) = (pilots.ncols(), y.ncols());
        if l == 0 || l > t {
            return Err(Error::invalid(format!("pilot length {l} for block length {t}")));
        }
        if priors.len() != n {
            return Err(Error::invalid(format!("{} priors for {n} users", priors.len())));
        }
        let constellation = Constellation::qpsk();
        if let Some(p) = priors
            .iter()
            .find(|p| p.positions() != t - l || p.n_points() != constellation.len())
        {
            return Err(Error::invalid(format!(
                "prior with {} positions x {} points, expected {} x {}",
                p.positions(),
                p.n_points(),
                t - l,
                constellation.len()
            )));
        }
        cfg.validate(n)?;
        let sigma = cfg.noise_var.sqrt();
        let snr = cfg.tx_power / cfg.noise_var;
        Ok(Detector {
            y: y.map(|v| v / sigma),
            pilots,
            priors,
            cfg,
            betas: cfg.betas.iter().map(|b| b * snr).collect(),
            logit_lambda: cfg.lambda.iter().map(|&l| logit(l)).collect(),
            constellation,
        })
    }

    fn n_users(&self) -> usize {
        self.pilots.nrows()
    }

    fn pilot_len(&self) -> usize {
        self.pilots.ncols()
    }

    /// Initial state before any iteration.
    pub fn init_cold(&self) -> DetectorState {
        let (m, n, t, l) = (self.y.nrows(), self.n_users(), self.y.ncols(), self.pilot_len());
        let c0 = C64::new(0.0, 0.0);
        let mut x_hat = CMatrix::from_element(n, t, c0);
        let mut v_x = RMatrix::zeros(n, t);
        x_hat.columns_mut(0, l).copy_from(self.pilots);
        for (u, prior) in self.priors.iter().enumerate() {
            for d in 0..t - l {
                let (mean, var) = prior.moments(d, &self.constellation);
                x_hat[(u, l + d)] = mean;
                v_x[(u, l + d)] = var;
            }
        }
        let v_h = RMatrix::from_fn(m, n, |_, j| self.cfg.lambda[j] * self.betas[j]);
        DetectorState {
            h_hat: CMatrix::from_element(m, n, c0),
            v_h,
            x_hat,
            v_x,
            s_hat: CMatrix::from_element(m, t, c0),
            v_s: RMatrix::zeros(m, t),
            mp: CMatrix::from_element(m, t, c0),
            vp: RMatrix::zeros(m, t),
            z_hat: CMatrix::from_element(m, t, c0),
            v_z: RMatrix::zeros(m, t),
            p_bar: CMatrix::from_element(m, t, c0),
            rho: RMatrix::from_fn(m, n, |_, j| self.cfg.lambda[j]),
            rho_tilde: RMatrix::from_fn(m, n, |_, j| self.cfg.lambda[j]),
            eta: self.priors.to_vec(),
            iter: 0,
            clamp_events: 0,
            updated_cols: 0,
        }
    }

    /// Initial state followed by the pilot-only warm start.
    pub fn init(&self, damping: f64) -> DetectorState {
        let mut state = self.init_cold();
        for _ in 0..self.cfg.warmup_pilot_iters {
            if !self.step(&mut state, self.pilot_len(), damping).finite {
                break;
            }
        }
        state
    }

    /// One pass of the update lines over columns `0..cols`. Columns beyond
    /// `cols` keep their current values.
    pub fn step(&self, st: &mut DetectorState, cols: usize, damping: f64) -> StepInfo {
        let (m_ant, n_users, l) = (self.y.nrows(), self.n_users(), self.pilot_len());
        let cols = cols.clamp(l, self.y.ncols());
        // residuals have no previous value until their column has been
        // updated once; channel and symbol estimates start from prior moments
        let fresh_from = st.updated_cols;
        let damp = |t: usize| t < fresh_from && damping < 1.0;

        let h_old = st.h_hat.clone();
        let vh_old = st.v_h.clone();
        let h_abs2 = h_old.map(|v| v.norm_sqr());
        let x = st.x_hat.columns(0, cols).into_owned();
        let vx = st.v_x.columns(0, cols).into_owned();
        let x_abs2 = x.map(|v| v.norm_sqr());

        // linear mixing
        let pbar = cmul(&h_old, &x);
        let vbar = &vh_old * &x_abs2 + &h_abs2 * &vx;
        let vhvx = &vh_old * &vx;

        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..cols {
            let dt = damp(t);
            for m in 0..m_ant {
                let mut vp = vbar[(m, t)] + vhvx[(m, t)];
                if !(vp >= VAR_FLOOR) {
                    vp = VAR_FLOOR;
                    st.clamp_events += 1;
                }
                let mp = pbar[(m, t)] - st.s_hat[(m, t)] * vbar[(m, t)];
                // normalised units: gamma = sigma^2 = 1
                let gain = vp / (vp + 1.0);
                let z = mp + (self.y[(m, t)] - mp) * gain;
                let vz = gain;
                let s = (z - mp) / vp;
                let vs = (1.0 - vz / vp) / vp;
                let (z, vz, s, vs) = if dt {
                    (
                        mix_c(damping, z, st.z_hat[(m, t)]),
                        vz,
                        mix_c(damping, s, st.s_hat[(m, t)]),
                        mix_r(damping, vs, st.v_s[(m, t)]),
                    )
                } else {
                    (z, vz, s, vs)
                };
                let p_old = st.p_bar[(m, t)];
                num += (pbar[(m, t)] - p_old).norm_sqr();
                den += p_old.norm_sqr();
                st.p_bar[(m, t)] = pbar[(m, t)];
                st.mp[(m, t)] = mp;
                st.vp[(m, t)] = vp;
                st.z_hat[(m, t)] = z;
                st.v_z[(m, t)] = vz;
                st.s_hat[(m, t)] = s;
                st.v_s[(m, t)] = vs;
            }
        }
        // Relative to the mixing energy alone, one strong user can hide weak
        // users that are still moving; the change must also be small
        // against the noise (unit power here).
        let ratio = if den > 0.0 {
            (num / den).max(num / (m_ant * cols) as f64)
        } else {
            f64::INFINITY
        };

        // channel pseudo-observations; pilot columns have V^x = 0 so the
        // pilot and data sums share one expression
        let s = st.s_hat.columns(0, cols).into_owned();
        let vs = st.v_s.columns(0, cols).into_owned();
        let prec = &vs * x_abs2.transpose();
        let cross = &vs * vx.transpose();
        let corr = cmul(&s, &x.adjoint());

        for n in 0..n_users {
            let beta = self.betas[n];
            let mut total = 0.0;
            for m in 0..m_ant {
                let r = h_old[(m, n)] * (prec[(m, n)] - cross[(m, n)]) + corr[(m, n)];
                let a = activity_evidence(r, prec[(m, n)], beta);
                // stash the evidence until the full sum is known
                st.rho[(m, n)] = a;
                total += a;
            }
            let full = self.logit_lambda[n] + total;
            let rt = logistic(full);
            for m in 0..m_ant {
                let a = st.rho[(m, n)];
                st.rho[(m, n)] = logistic(full - a);
                st.rho_tilde[(m, n)] = rt;
                let r = h_old[(m, n)] * (prec[(m, n)] - cross[(m, n)]) + corr[(m, n)];
                let (h, vh) = bg_denoise_information(r, prec[(m, n)], rt, beta);
                if damping >= 1.0 {
                    st.h_hat[(m, n)] = h;
                    st.v_h[(m, n)] = vh;
                } else {
                    st.h_hat[(m, n)] = mix_c(damping, h, h_old[(m, n)]);
                    st.v_h[(m, n)] = mix_r(damping, vh, vh_old[(m, n)]);
                }
            }
        }

        // soft symbols
        if cols > l {
            let sd = s.columns(l, cols - l).into_owned();
            let vsd = vs.columns(l, cols - l);
            let prec_x = h_abs2.transpose() * vsd;
            let cross_x = vh_old.transpose() * vsd;
            let corr_x = cmul(&h_old.adjoint(), &sd);
            let q = self.constellation.len();
            let mut post = vec![0.0; q];
            for d in 0..cols - l {
                let t = l + d;
                let dt = damping < 1.0;
                for n in 0..n_users {
                    let px = prec_x[(n, d)];
                    let r = x[(n, t)] * (px - cross_x[(n, d)]) + corr_x[(n, d)];
                    posterior_from_information(
                        r,
                        px,
                        self.priors[n].get(d),
                        &self.constellation,
                        &mut post,
                    );
                    st.eta[n].get_mut(d).copy_from_slice(&post);
                    let (mean, var) = crate::modem::symbol_moments(&post, &self.constellation);
                    if dt {
                        st.x_hat[(n, t)] = mix_c(damping, mean, x[(n, t)]);
                        st.v_x[(n, t)] = mix_r(damping, var, vx[(n, t)]);
                    } else {
                        st.x_hat[(n, t)] = mean;
                        st.v_x[(n, t)] = var;
                    }
                }
            }
        }

        st.iter += 1;
        st.updated_cols = st.updated_cols.max(cols);
        let finite = st.h_hat.iter().all(|v| v.re.is_finite() && v.im.is_finite())
            && st.v_h.iter().all(|v| v.is_finite())
            && st.x_hat.iter().all(|v| v.re.is_finite() && v.im.is_finite())
            && st.v_x.iter().all(|v| v.is_finite())
            && st.z_hat.iter().all(|v| v.re.is_finite() && v.im.is_finite());
        StepInfo { ratio, finite }
    }

    fn mean_rho(&self, st: &DetectorState) -> Vec<f64> {
        let m = st.rho_tilde.nrows() as f64;
        st.rho_tilde.column_iter().map(|c| c.sum() / m).collect()
    }

    fn trace_row(&self, st: &DetectorState, info: StepInfo, warmup: bool) -> TraceRow {
        TraceRow {
            iteration: st.iter,
            warmup,
            ratio: info.ratio,
            mean_vp: st.vp.mean(),
            clamp_events: st.clamp_events,
            mean_rho: self.mean_rho(st),
        }
    }

    /// One full attempt with the given damping; `None` on divergence.
    fn attempt(&self, damping: f64, max_iters: usize) -> Option<DetectorOutput> {
        let mut st = self.init_cold();
        let mut trace = Vec::new();
        for _ in 0..self.cfg.warmup_pilot_iters {
            let info = self.step(&mut st, self.pilot_len(), damping);
            if !info.finite {
                return None;
            }
            if self.cfg.trace {
                trace.push(self.trace_row(&st, info, true));
            }
        }
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iters {
            let info = self.step(&mut st, self.y.ncols(), damping);
            iterations += 1;
            if !info.finite {
                return None;
            }
            if self.cfg.trace {
                trace.push(self.trace_row(&st, info, false));
            }
            if info.ratio <= self.cfg.tol {
                converged = true;
                break;
            }
        }
        let mut out = self.output(&st);
        out.iterations = iterations;
        out.converged = converged;
        out.trace = trace;
        Some(out)
    }

    /// Detection decisions and physical-unit estimates from a state.
    pub fn output(&self, st: &DetectorState) -> DetectorOutput {
        let mean_rho = self.mean_rho(st);
        let active_set = match &self.cfg.active_override {
            Some(set) => {
                let mut set = set.clone();
                set.sort_unstable();
                set.dedup();
                set
            }
            None => steps::detect_activity(&mean_rho, self.cfg.theta),
        };
        let scale = (self.cfg.noise_var / self.cfg.tx_power).sqrt();
        DetectorOutput {
            symbol_posteriors: active_set.iter().map(|&n| st.eta[n].clone()).collect(),
            active_set,
            channel_estimate: st.h_hat.map(|v| v * scale),
            mean_rho,
            iterations: 0,
            converged: false,
            clamp_events: st.clamp_events,
            retried: false,
            diverged: false,
            trace: Vec::new(),
        }
    }
}

/// Run the detector to convergence. A run that diverges or stops at the
/// iteration cap is repeated once with half the damping and twice the cap.
/// A stalled first run is only replaced when the repeat converges. If both
/// runs diverge the output reports no active users, a zero channel
/// estimate and `diverged = true`.
pub fn run(
    y: &CMatrix,
    pilots: &CMatrix,
    priors: &[SymbolDistribution],
    cfg: &DetectorConfig,
) -> Result<DetectorOutput> {
    let det = Detector::new(y, pilots, priors, cfg)?;
    let first = det.attempt(cfg.damping, cfg.max_iters);
    if let Some(out) = &first {
        if out.converged {
            return Ok(first.unwrap());
        }
        debug!("detector stalled, retrying with damping {}", cfg.damping / 2.0);
    } else {
        warn!("detector diverged, retrying with damping {}", cfg.damping / 2.0);
    }
    let second = det.attempt(cfg.damping / 2.0, 2 * cfg.max_iters);
    match (first, second) {
        (_, Some(mut out)) if out.converged => {
            out.retried = true;
            return Ok(out);
        }
        (Some(out), _) => return Ok(out),
        (None, Some(mut out)) => {
            out.retried = true;
            return Ok(out);
        }
        (None, None) => {}
    }
    debug!("detector diverged twice");
    let n = pilots.nrows();
    Ok(DetectorOutput {
        active_set: Vec::new(),
        symbol_posteriors: Vec::new(),
        channel_estimate: CMatrix::from_element(y.nrows(), n, C64::new(0.0, 0.0)),
        mean_rho: vec![0.0; n],
        iterations: cfg.max_iters,
        converged: false,
        clamp_events: 0,
        retried: true,
        diverged: true,
        trace: Vec::new(),
    })
}

/// Uniform priors over the data phase for `n_users` users.
pub fn uniform_priors(n_users: usize, data_len: usize) -> Vec<SymbolDistribution> {
    let q = Constellation::qpsk().len();
    vec![SymbolDistribution::uniform(data_len, q); n_users]
}

/// Write trace rows as CSV: iteration, phase, ratio, mean V^p, clamps and
/// one mean-rho column per user.
pub fn write_trace_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.mean_rho.len());
    write!(w, "iteration,phase,ratio,mean_vp,clamp_events")?;
    for u in 0..n {
        write!(w, ",rho_{u}")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(
            w,
            "{},{},{:e},{:e},{}",
            r.iteration,
            if r.warmup { "warmup" } else { "main" },
            r.ratio,
            r.mean_vp,
            r.clamp_events
        )?;
        for v in &r.mean_rho {
            write!(w, ",{v:.6}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[inline]
fn mix_c(d: f64, new: C64, old: C64) -> C64 {
    new * d + old * (1.0 - d)
}

#[inline]
fn mix_r(d: f64, new: f64, old: f64) -> f64 {
    d * new + (1.0 - d) * old
}

/// Complex product through four real products, which take the blocked
/// real kernel instead of the generic one.
fn cmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = (a.map(|v| v.re), a.map(|v| v.im));
    let (br, bi) = (b.map(|v| v.re), b.map(|v| v.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}
