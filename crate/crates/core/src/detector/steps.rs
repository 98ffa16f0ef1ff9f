//! Scalar forms of the individual detector updates.
//!
//! The matrix iteration in [`super`] works in information form
//! (precision `1/Q` and precision-weighted mean `P/Q`) so that a user with no
//! data-phase evidence never produces an infinite variance. The functions
//! here take the plain `(P, Q)` parameters and are the reference the
//! matrix code is tested against.

use crate::{Error, Result, C64};

/// Linear mixing for one `(m, t)`: the row of `h_hat`/`V^h` at antenna `m`, the
/// column of `x_hat`/`V^x` at symbol `t`, and the previous scaled residual.
/// Returns `(M^p, V^p)`.
pub fn linear_mixing(h: &[C64], vh: &[f64], x: &[C64], vx: &[f64], s_prev: C64) -> (C64, f64) {
    let mut pbar = C64::new(0.0, 0.0);
    let mut vbar = 0.0;
    let mut vv = 0.0;
    for n in 0..h.len() {
        pbar += h[n] * x[n];
        vbar += x[n].norm_sqr() * vh[n] + h[n].norm_sqr() * vx[n];
        vv += vh[n] * vx[n];
    }
    (pbar - s_prev * vbar, vbar + vv)
}

/// Gaussian posterior of `z` given the prior `CN(M^p, V^p)` and
/// the observation `y = sqrt(gamma) z + CN(0, noise_var)`.
pub fn awgn_posterior_z(
    y: C64,
    mp: C64,
    vp: f64,
    gamma: f64,
    noise_var: f64,
) -> Result<(C64, f64)> {
    let denom = gamma * vp + noise_var;
    if !(denom > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "gamma V^p + sigma^2 = {denom}"
        )));
    }
    let g = gamma.sqrt();
    let z = mp + (y - mp * g) * (g * vp / denom);
    Ok((z, vp * noise_var / denom))
}

/// Scaled residual and its inverse variance.
pub fn residual_update(z: C64, vz: f64, mp: C64, vp: f64) -> (C64, f64) {
    ((z - mp) / vp, (1.0 - vz / vp) / vp)
}

/// Gaussian pseudo-observation of a coefficient: mean `P`, variance `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoObs {
    pub mean: C64,
    pub var: f64,
}

impl PseudoObs {
    pub fn precision(&self) -> f64 {
        if self.var.is_infinite() {
            0.0
        } else {
            1.0 / self.var
        }
    }

    /// `P / Q`; zero for an uninformative observation.
    pub fn weighted_mean(&self) -> C64 {
        self.mean * self.precision()
    }

    pub fn from_information(weighted_mean: C64, precision: f64) -> Self {
        if precision > 0.0 {
            PseudoObs {
                mean: weighted_mean / precision,
                var: 1.0 / precision,
            }
        } else {
            PseudoObs {
                mean: C64::new(0.0, 0.0),
                var: f64::INFINITY,
            }
        }
    }
}

/// Precision-weighted fusion of pilot- and data-phase
/// observations.
pub fn combine_pseudo_obs(pilot: PseudoObs, data: PseudoObs) -> PseudoObs {
    PseudoObs::from_information(
        pilot.weighted_mean() + data.weighted_mean(),
        pilot.precision() + data.precision(),
    )
}

/// Per-antenna log evidence ratio slab/spike in information form:
/// `ln(Q / (Q + beta)) + |P|^2 beta / ((Q + beta) Q)` with `1/Q = precision`
/// and `P/Q = weighted_mean`.
#[inline]
pub fn activity_evidence(weighted_mean: C64, precision: f64, beta: f64) -> f64 {
    let bp = beta * precision;
    -bp.ln_1p() + beta * weighted_mean.norm_sqr() / (1.0 + bp)
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Activity posterior for one user across all antennas. Returns `(rho, rho_tilde)`
/// per antenna; `rho` leaves antenna `m` out of the evidence sum, `rho_tilde`
/// folds it back in.
pub fn activity_posterior(obs: &[PseudoObs], lambda: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let evidence: Vec<f64> = obs
        .iter()
        .map(|o| activity_evidence(o.weighted_mean(), o.precision(), beta))
        .collect();
    let total: f64 = evidence.iter().sum();
    let prior = logit(lambda);
    let rho = evidence
        .iter()
        .map(|&a| logistic(prior + total - a))
        .collect();
    // rho / (rho + (1 - rho) e^{-A_m}) collapses to the full-sum logistic
    let rho_tilde = vec![logistic(prior + total); evidence.len()];
    (rho, rho_tilde)
}

/// Posterior mean and variance under the Bernoulli-Gaussian
/// prior `(1 - rho) delta_0 + rho CN(0, beta)` given `CN(P, Q)` evidence, with
/// `rho_tilde` the posterior probability of the slab.
pub fn bg_denoise(p: C64, q: f64, rho_tilde: f64, beta: f64) -> (C64, f64) {
    let obs = PseudoObs { mean: p, var: q };
    bg_denoise_information(obs.weighted_mean(), obs.precision(), rho_tilde, beta)
}

#[inline]
pub fn bg_denoise_information(
    weighted_mean: C64,
    precision: f64,
    rho_tilde: f64,
    beta: f64,
) -> (C64, f64) {
    let d = 1.0 + beta * precision;
    let slab_mean = weighted_mean * (beta / d);
    let slab_var = beta / d;
    let mean = slab_mean * rho_tilde;
    let var = rho_tilde * (slab_var + slab_mean.norm_sqr()) - mean.norm_sqr();
    (mean, var.max(0.0))
}

/// Users whose antenna-averaged `rho_tilde` reaches `theta`.
pub fn detect_activity(mean_rho: &[f64], theta: f64) -> Vec<usize> {
    mean_rho
        .iter()
        .enumerate()
        .filter(|(_, &r)| r >= theta)
        .map(|(n, _)| n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{gaussian_symbol_posterior, Constellation};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn linear_mixing_examples() {
        // zero residual: plain sum
        let (mp, _) = linear_mixing(&[c(1.0), c(2.0)], &[0.1, 0.2], &[c(3.0), c(-1.0)], &[0.0, 0.5], c(0.0));
        assert_eq!(mp, c(1.0));
        let (_, vp) = linear_mixing(&[c(1.0)], &[0.0], &[c(2.0)], &[0.0], c(0.7));
        assert_eq!(vp, 0.0);
        // hand-evaluated: 2 - 1 (4 0.5 + 1 0.25) = -0.25; 2.25 + 0.125
        let (mp, vp) = linear_mixing(&[c(1.0)], &[0.5], &[c(2.0)], &[0.25], c(1.0));
        assert!((mp - c(-0.25)).norm() < 1e-15);
        assert!((vp - 2.375).abs() < 1e-15);
    }

    #[test]
    fn awgn_posterior_examples() {
        let (z, vz) = awgn_posterior_z(c(3.0), c(0.5), 0.0, 2.0, 1.0).unwrap();
        assert_eq!((z, vz), (c(0.5), 0.0));
        let (z, vz) = awgn_posterior_z(c(3.0), c(0.5), 1.0, 4.0, 1e-14).unwrap();
        assert!((z - c(1.5)).norm() < 1e-9 && vz < 1e-12);
        let (z, vz) = awgn_posterior_z(c(2.0), c(0.0), 1.0, 1.0, 1.0).unwrap();
        assert!((z - c(1.0)).norm() < 1e-15 && (vz - 0.5).abs() < 1e-15);
        assert!(awgn_posterior_z(c(1.0), c(0.0), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn awgn_posterior_matches_quadrature() {
        // Real and imaginary parts factorise; integrate one real dimension
        // of the posterior numerically with per-dimension variance halves.
        let (y, mp, vp, gamma, nv) = (C64::new(0.8, -0.3), C64::new(0.1, 0.4), 0.7, 2.0, 0.5);
        let (z, vz) = awgn_posterior_z(y, mp, vp, gamma, nv).unwrap();
        let density = |u: f64, mean: f64, yy: f64| {
            (-(u - mean).powi(2) / vp - (yy - gamma.sqrt() * u).powi(2) / nv).exp()
        };
        for (mean, yy, expect) in [(mp.re, y.re, z.re), (mp.im, y.im, z.im)] {
            let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
            let steps = 200_000;
            for i in 0..steps {
                let u = -10.0 + 20.0 * (i as f64 + 0.5) / steps as f64;
                let d = density(u, mean, yy);
                w += d;
                m1 += u * d;
                m2 += u * u * d;
            }
            let mean_q = m1 / w;
            assert!((mean_q - expect).abs() < 1e-9);
            // per real dimension the variance is V^z / 2
            assert!((m2 / w - mean_q * mean_q - vz / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual_update(c(0.3), 0.1, c(0.3), 0.4).0, c(0.0));
        assert_eq!(residual_update(c(0.3), 0.4, c(0.1), 0.4).1, 0.0);
        let (s, vs) = residual_update(c(1.0), 0.5, c(-0.25), 2.375);
        assert!((s.re - 0.5263).abs() < 1e-4 && s.im == 0.0);
        assert!((vs - 0.3324).abs() < 1e-4);
    }

    #[test]
    fn combine_examples() {
        let q = 0.8;
        let out = combine_pseudo_obs(
            PseudoObs { mean: c(1.0), var: q },
            PseudoObs { mean: c(3.0), var: q },
        );
        assert!((out.var - q / 2.0).abs() < 1e-15);
        assert!((out.mean - c(2.0)).norm() < 1e-15);
        // an uninformative data phase leaves the pilot observation intact
        let out = combine_pseudo_obs(
            PseudoObs { mean: c(1.5), var: 0.5 },
            PseudoObs::from_information(c(0.0), 0.0),
        );
        assert_eq!(out, PseudoObs { mean: c(1.5), var: 0.5 });
    }

    /// Direct transcription of the activity update for cross-checking.
    fn direct_activity(p: &[C64], q: &[f64], lambda: f64, beta: f64, m: usize) -> (f64, f64, f64) {
        let term = |k: usize| (q[k] / (q[k] + beta)).ln() + p[k].norm_sqr() * beta / ((q[k] + beta) * q[k]);
        let l = (lambda / (1.0 - lambda)).ln() + (0..p.len()).filter(|&k| k != m).map(term).sum::<f64>();
        let rho = l.exp() / (1.0 + l.exp());
        let rt = rho / (rho + (1.0 - rho) * (-term(m)).exp());
        (l, rho, rt)
    }

    #[test]
    fn activity_examples() {
        let (l, rho, rt) = direct_activity(&[c(2.0), c(2.0)], &[1.0, 1.0], 0.5, 1.0, 0);
        assert!((l - 1.3069).abs() < 1e-4);
        assert!((rho - 0.7871).abs() < 1e-3);
        assert!((rt - 0.9317).abs() < 1e-4);

        let obs = [PseudoObs { mean: c(2.0), var: 1.0 }; 2];
        let (r, rtilde) = activity_posterior(&obs, 0.5, 1.0);
        for m in 0..2 {
            assert!((r[m] - rho).abs() < 1e-12);
            assert!((rtilde[m] - rt).abs() < 1e-12);
        }
        // zero evidence gives the logistic midpoint
        let flat = [PseudoObs { mean: c(0.0), var: f64::INFINITY }; 3];
        let (r, _) = activity_posterior(&flat, 0.5, 2.0);
        assert!(r.iter().all(|&x| x == 0.5));
        // near-certain prior dominates weak evidence
        let weak = [PseudoObs { mean: c(0.0), var: 1.0 }; 3];
        let (r, rt) = activity_posterior(&weak, 1.0 - 1e-12, 1.0);
        assert!(r.iter().chain(&rt).all(|&x| x > 0.999));
    }

    #[test]
    fn bg_denoise_examples() {
        assert_eq!(bg_denoise(c(2.0), 1.0, 0.0, 1.0), (c(0.0), 0.0));
        let (h, v) = bg_denoise(c(2.0), 1.0, 1.0, 1.0);
        assert!((h - c(1.0)).norm() < 1e-15 && (v - 0.5).abs() < 1e-15);
        let (h, v) = bg_denoise(c(2.0), 1e-12, 0.5, 1.0);
        assert!((h - c(1.0)).norm() < 1e-9 && (v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bg_denoise_matches_quadrature() {
        // Slab posterior from a 2-D grid; spike contributes mass at zero.
        let (p, q, beta, rt) = (C64::new(0.6, -0.4), 0.5, 1.3, 0.7);
        let (h, v) = bg_denoise(p, q, rt, beta);
        let n = 600;
        let (mut w, mut m1, mut m2) = (0.0, C64::new(0.0, 0.0), 0.0);
        for i in 0..n {
            for j in 0..n {
                let u = C64::new(
                    -6.0 + 12.0 * (i as f64 + 0.5) / n as f64,
                    -6.0 + 12.0 * (j as f64 + 0.5) / n as f64,
                );
                let d = (-u.norm_sqr() / beta - (u - p).norm_sqr() / q).exp();
                w += d;
                m1 += u * d;
                m2 += u.norm_sqr() * d;
            }
        }
        let slab_mean = m1 / w;
        let slab_second = m2 / w;
        let mean = slab_mean * rt;
        let var = rt * slab_second - mean.norm_sqr();
        assert!((mean - h).norm() < 1e-6);
        assert!((var - v).abs() < 1e-6);
    }

    #[test]
    fn symbol_posterior_examples() {
        let qpsk = Constellation::qpsk();
        let mut out = [0.0; 4];
        gaussian_symbol_posterior(c(0.0), 1.0, &[0.25; 4], &qpsk, &mut out);
        let (x, vx) = crate::modem::symbol_moments(&out, &qpsk);
        assert!(x.norm() < 1e-15 && (vx - 1.0).abs() < 1e-12);
        gaussian_symbol_posterior(C64::new(-1.0, 2.0), 0.4, &[1.0, 0.0, 0.0, 0.0], &qpsk, &mut out);
        let (_, vx) = crate::modem::symbol_moments(&out, &qpsk);
        assert_eq!(out[0], 1.0);
        assert_eq!(vx, 0.0);
    }

    #[test]
    fn threshold_boundary() {
        assert_eq!(detect_activity(&[0.4, 0.39, 0.41], 0.4), vec![0, 2]);
        assert!(detect_activity(&[0.0; 5], 0.4).is_empty());
        assert_eq!(detect_activity(&[1.0; 3], 0.4), vec![0, 1, 2]);
    }
}
