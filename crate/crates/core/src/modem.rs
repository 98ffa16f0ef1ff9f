//! QPSK mapping and the probability/LLR algebra between detector and
//! decoder.
//!
//! Bit `l` of a symbol label is counted from the most significant end, so
//! for QPSK the label of point `s_k` is `(k >> 1, k & 1)`: `s0 = '00'`,
//! `s1 = '01'`, `s2 = '10'`, `s3 = '11'`. Coded bit `j` of a block rides on
//! data symbol `j / log2|X|` at label position `j % log2|X|`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::{clip_llr, C64, LLR_CLIP};

static NORMALIZATION_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of distributions whose mass was off by more than 1e-6 before
/// renormalisation, process-wide.
pub fn normalization_warnings() -> u64 {
    NORMALIZATION_WARNINGS.load(Ordering::Relaxed)
}

fn renormalize(probs: &mut [f64]) {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        NORMALIZATION_WARNINGS.fetch_add(1, Ordering::Relaxed);
    }
    if total > 0.0 && total.is_finite() {
        for p in probs.iter_mut() {
            *p /= total;
        }
    } else {
        let u = 1.0 / probs.len() as f64;
        probs.fill(u);
    }
}

/// Unit-power constellation with its bit labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
    bits_per_symbol: usize,
}

impl Constellation {
    /// Gray-labelled QPSK.
    pub fn qpsk() -> Self {
        let a = FRAC_1_SQRT_2;
        Constellation {
            points: vec![
                C64::new(a, a),
                C64::new(-a, a),
                C64::new(a, -a),
                C64::new(-a, -a),
            ],
            bits_per_symbol: 2,
        }
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Label bit `l` of point `k`.
    #[inline]
    pub fn label_bit(&self, k: usize, l: usize) -> u8 {
        ((k >> (self.bits_per_symbol - 1 - l)) & 1) as u8
    }

    pub fn index_of(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.bits_per_symbol);
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn map(&self, bits: &[u8]) -> C64 {
        self.points[self.index_of(bits)]
    }

    /// Nearest point's index.
    pub fn nearest(&self, z: C64) -> usize {
        (0..self.len())
            .min_by(|&a, &b| {
                (z - self.points[a])
                    .norm_sqr()
                    .total_cmp(&(z - self.points[b]).norm_sqr())
            })
            .unwrap_or(0)
    }

    pub fn demap(&self, z: C64) -> Vec<u8> {
        let k = self.nearest(z);
        (0..self.bits_per_symbol).map(|l| self.label_bit(k, l)).collect()
    }

    /// Map a whole coded block to symbols.
    pub fn modulate(&self, bits: &[u8]) -> Vec<C64> {
        bits.chunks(self.bits_per_symbol).map(|c| self.map(c)).collect()
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

pub fn qpsk_map(bits: [u8; 2]) -> C64 {
    Constellation::qpsk().map(&bits)
}

pub fn qpsk_demap(z: C64) -> [u8; 2] {
    let b = Constellation::qpsk().demap(z);
    [b[0], b[1]]
}

/// Data symbol (relative to the data phase) and label position of coded
/// bit `j`.
#[inline]
pub fn bit_location(j: usize, bits_per_symbol: usize) -> (usize, usize) {
    (j / bits_per_symbol, j % bits_per_symbol)
}

/// Inverse of [`bit_location`].
#[inline]
pub fn bit_index(t: usize, pos: usize, bits_per_symbol: usize) -> usize {
    t * bits_per_symbol + pos
}

/// Per-position distributions over constellation points, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDistribution {
    n_points: usize,
    probs: Vec<f64>,
}

impl SymbolDistribution {
    pub fn uniform(positions: usize, n_points: usize) -> Self {
        SymbolDistribution {
            n_points,
            probs: vec![1.0 / n_points as f64; positions * n_points],
        }
    }

    /// Wrap raw probabilities, renormalising every position.
    pub fn from_probs(n_points: usize, mut probs: Vec<f64>) -> Self {
        assert_eq!(probs.len() % n_points, 0, "ragged distribution");
        for row in probs.chunks_mut(n_points) {
            renormalize(row);
        }
        SymbolDistribution { n_points, probs }
    }

    pub fn positions(&self) -> usize {
        self.probs.len() / self.n_points
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn get(&self, t: usize) -> &[f64] {
        &self.probs[t * self.n_points..(t + 1) * self.n_points]
    }

    pub fn get_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.probs[t * self.n_points..(t + 1) * self.n_points]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.probs.chunks_exact(self.n_points)
    }

    /// Mean and variance of the symbol at position `t`.
    pub fn moments(&self, t: usize, c: &Constellation) -> (C64, f64) {
        symbol_moments(self.get(t), c)
    }
}

/// Mean and variance of a distribution over the points of `c`.
pub fn symbol_moments(probs: &[f64], c: &Constellation) -> (C64, f64) {
    let mut mean = C64::new(0.0, 0.0);
    let mut power = 0.0;
    for (p, s) in probs.iter().zip(c.points()) {
        mean += s * *p;
        power += p * s.norm_sqr();
    }
    (mean, (power - mean.norm_sqr()).max(0.0))
}

/// Symbol prior from independent bit priors: each point's probability is
/// the product of its label bits' probabilities. `bits[l]` is
/// `(p(c_l = 0), p(c_l = 1))`.
pub fn bit_priors_to_symbol_prior(bits: &[(f64, f64)], c: &Constellation) -> Vec<f64> {
    assert_eq!(bits.len(), c.bits_per_symbol());
    let mut probs: Vec<f64> = (0..c.len())
        .map(|k| {
            bits.iter()
                .enumerate()
                .map(|(l, &(p0, p1))| if c.label_bit(k, l) == 0 { p0 } else { p1 })
                .product()
        })
        .collect();
    renormalize(&mut probs);
    probs
}

/// Bit marginals of a symbol distribution: element `l` is
/// `(p(c_l = 0), p(c_l = 1))`.
pub fn symbol_posterior_to_bit_posterior(probs: &[f64], c: &Constellation) -> Vec<(f64, f64)> {
    (0..c.bits_per_symbol())
        .map(|l| {
            probs
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(p0, p1), (k, &p)| {
                    if c.label_bit(k, l) == 0 {
                        (p0 + p, p1)
                    } else {
                        (p0, p1 + p)
                    }
                })
        })
        .collect()
}

/// `ln(p0 / p1)`, saturated at +-30.
pub fn prob_to_llr(p0: f64, p1: f64) -> f64 {
    match (p0 > 0.0, p1 > 0.0) {
        (true, true) => clip_llr((p0 / p1).ln()),
        (true, false) => LLR_CLIP,
        (false, true) => -LLR_CLIP,
        (false, false) => 0.0,
    }
}

/// `p(c = 0)` for an LLR, `e^L / (1 + e^L)`.
pub fn llr_to_prob0(llr: f64) -> f64 {
    1.0 / (1.0 + (-llr).exp())
}

/// `p(c = 1)` for an LLR, `1 / (1 + e^L)`; computed directly rather than as
/// `1 - p0` so large LLRs keep their precision.
pub fn llr_to_prob1(llr: f64) -> f64 {
    1.0 / (1.0 + llr.exp())
}

/// `(p(c = 0), p(c = 1))` for an LLR.
pub fn llr_to_probs(llr: f64) -> (f64, f64) {
    (llr_to_prob0(llr), llr_to_prob1(llr))
}

/// Extrinsic part of a posterior LLR.
pub fn extrinsic(posterior: f64, prior: f64) -> f64 {
    clip_llr(posterior - prior)
}

/// Symbol priors for a whole block from per-bit LLRs.
pub fn symbol_priors_from_llrs(llrs: &[f64], c: &Constellation) -> SymbolDistribution {
    let bps = c.bits_per_symbol();
    assert_eq!(llrs.len() % bps, 0, "LLR count not a multiple of bits/symbol");
    let mut probs = Vec::with_capacity(llrs.len() / bps * c.len());
    let mut bits = vec![(0.0, 0.0); bps];
    for chunk in llrs.chunks(bps) {
        for (q, &l) in bits.iter_mut().zip(chunk) {
            *q = llr_to_probs(l);
        }
        probs.extend(bit_priors_to_symbol_prior(&bits, c));
    }
    SymbolDistribution {
        n_points: c.len(),
        probs,
    }
}

/// Per-bit posterior LLRs for a whole block from symbol posteriors.
pub fn bit_llrs_from_symbol_posteriors(dist: &SymbolDistribution, c: &Constellation) -> Vec<f64> {
    let mut out = Vec::with_capacity(dist.positions() * c.bits_per_symbol());
    for probs in dist.iter() {
        out.extend(
            symbol_posterior_to_bit_posterior(probs, c)
                .into_iter()
                .map(|(p0, p1)| prob_to_llr(p0, p1)),
        );
    }
    out
}

/// Posterior over the points given a Gaussian pseudo-observation in
/// information form: `ln post(s) = ln prior(s) - precision |s|^2
/// + 2 Re(conj(s) weighted_mean) + const`. Zero precision returns the prior.
pub fn posterior_from_information(
    weighted_mean: C64,
    precision: f64,
    prior: &[f64],
    c: &Constellation,
    out: &mut [f64],
) {
    if precision == 0.0 && weighted_mean == C64::new(0.0, 0.0) {
        out.copy_from_slice(prior);
        return;
    }
    let mut top = f64::NEG_INFINITY;
    for ((o, &p), s) in out.iter_mut().zip(prior).zip(c.points()) {
        *o = if p > 0.0 {
            p.ln() - precision * s.norm_sqr() + 2.0 * (s.conj() * weighted_mean).re
        } else {
            f64::NEG_INFINITY
        };
        top = top.max(*o);
    }
    if !top.is_finite() {
        out.copy_from_slice(prior);
        renormalize(out);
        return;
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - top).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `post(s) ~ prior(s) exp(-|s - mean|^2 / var)`. An infinite variance
/// returns the prior.
pub fn gaussian_symbol_posterior(
    mean: C64,
    var: f64,
    prior: &[f64],
    c: &Constellation,
    out: &mut [f64],
) {
    let precision = if var.is_finite() { 1.0 / var } else { 0.0 };
    posterior_from_information(mean * precision, precision, prior, c, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn qpsk_points() {
        let s = qpsk_map([0, 0]);
        assert!((s.re - 0.7071).abs() < 1e-4 && (s.im - 0.7071).abs() < 1e-4);
        assert_eq!(qpsk_map([0, 1]), C64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        assert_eq!(qpsk_map([1, 1]), C64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
        assert_eq!(qpsk_map([1, 0]), C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
        assert!((Constellation::qpsk().mean_power() - 1.0).abs() < 1e-15);
        for b in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(qpsk_demap(qpsk_map(b)), b);
        }
    }

    #[test]
    fn bit_sets_follow_label_order() {
        let c = Constellation::qpsk();
        // X_0^0 = {s0, s1}, X_1^0 = {s0, s2}
        let zero_first: Vec<usize> = (0..4).filter(|&k| c.label_bit(k, 0) == 0).collect();
        let zero_second: Vec<usize> = (0..4).filter(|&k| c.label_bit(k, 1) == 0).collect();
        assert_eq!(zero_first, vec![0, 1]);
        assert_eq!(zero_second, vec![0, 2]);
        assert_eq!(bit_location(5, 2), (2, 1));
        assert_eq!(bit_index(2, 1, 2), 5);
    }

    #[test]
    fn bit_to_symbol_priors() {
        let c = Constellation::qpsk();
        assert_eq!(bit_priors_to_symbol_prior(&[(0.5, 0.5); 2], &c), vec![0.25; 4]);
        let p = bit_priors_to_symbol_prior(&[(0.9, 0.1), (0.8, 0.2)], &c);
        assert!((p[0] - 0.72).abs() < 1e-12);
        assert_eq!(
            bit_priors_to_symbol_prior(&[(1.0, 0.0); 2], &c),
            vec![1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn symbol_to_bit_posteriors() {
        let c = Constellation::qpsk();
        let b = symbol_posterior_to_bit_posterior(&[0.4, 0.3, 0.2, 0.1], &c);
        assert!((b[0].0 - 0.7).abs() < 1e-12);
        assert!((b[1].0 - 0.6).abs() < 1e-12);
        for (p0, p1) in symbol_posterior_to_bit_posterior(&[0.25; 4], &c) {
            assert_eq!((p0, p1), (0.5, 0.5));
        }
        let b = symbol_posterior_to_bit_posterior(&[0.0, 0.0, 0.0, 1.0], &c);
        assert_eq!(b, vec![(0.0, 1.0), (0.0, 1.0)]);
    }

    #[test]
    fn llr_conversions() {
        assert_eq!(prob_to_llr(0.5, 0.5), 0.0);
        assert!((prob_to_llr(0.8, 0.2) - 1.3863).abs() < 1e-4);
        assert_eq!(prob_to_llr(1.0, 0.0), 30.0);
        assert_eq!(prob_to_llr(0.0, 1.0), -30.0);
        assert_eq!(extrinsic(2.0, 2.0), 0.0);
        assert_eq!(extrinsic(3.5, 1.0), 2.5);
        assert_eq!(extrinsic(-4.25, 0.0), -4.25);
    }

    #[test]
    fn gaussian_posterior_at_a_point() {
        let c = Constellation::qpsk();
        let mut out = [0.0; 4];
        gaussian_symbol_posterior(c.points()[0], 1.0, &[0.25; 4], &c, &mut out);
        let expected = 1.0 / (1.0 + 2.0 * (-2.0f64).exp() + (-4.0f64).exp());
        assert!((out[0] - expected).abs() < 1e-12);
        assert!((out[0] - 0.7758).abs() < 1e-4);

        gaussian_symbol_posterior(C64::new(0.0, 0.0), 0.3, &[0.25; 4], &c, &mut out);
        assert!(out.iter().all(|&p| (p - 0.25).abs() < 1e-12));

        gaussian_symbol_posterior(C64::new(3.0, 1.0), f64::INFINITY, &[0.1, 0.2, 0.3, 0.4], &c, &mut out);
        assert_eq!(out, [0.1, 0.2, 0.3, 0.4]);

        gaussian_symbol_posterior(C64::new(-1.0, -1.0), 0.5, &[1.0, 0.0, 0.0, 0.0], &c, &mut out);
        assert_eq!(out, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn block_conversions_line_up() {
        let c = Constellation::qpsk();
        let llrs = [3.0, -1.0, 0.0, 2.0];
        let priors = symbol_priors_from_llrs(&llrs, &c);
        assert_eq!(priors.positions(), 2);
        let back = bit_llrs_from_symbol_posteriors(&priors, &c);
        for (a, b) in llrs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn bit_symbol_round_trip(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let c = Constellation::qpsk();
            let sym = bit_priors_to_symbol_prior(&[(a, 1.0 - a), (b, 1.0 - b)], &c);
            prop_assert!((sym.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let bits = symbol_posterior_to_bit_posterior(&sym, &c);
            prop_assert!((bits[0].0 - a).abs() < 1e-9);
            prop_assert!((bits[1].0 - b).abs() < 1e-9);
        }

        #[test]
        fn llr_round_trip(l in -29.0f64..29.0) {
            let (p0, p1) = llr_to_probs(l);
            prop_assert!((prob_to_llr(p0, p1) - l).abs() < 1e-9);
        }
    }
}
