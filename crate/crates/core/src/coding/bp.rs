//! Log-domain sum-product decoder on the Tanner graph, flooding schedule.

use crate::{clip_llr, LLR_CLIP};

use super::ldpc::ParityCheckMatrix;

/// Decoder outcome for one codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput {
    /// Posterior LLRs `ln p(c=0|.) / p(c=1|.)`.
    pub posterior: Vec<f64>,
    pub iterations: usize,
    /// Hard decision of `posterior` satisfies every check.
    pub syndrome_ok: bool,
}

/// Sum-product decoder bound to one parity-check matrix.
///
/// The edge layout is derived once; each call to [`BpDecoder::decode`] owns
/// its message buffers, so one decoder can serve many threads.
#[derive(Debug, Clone)]
pub struct BpDecoder {
    n_bits: usize,
    /// Edge ranges per check in `edge_bit`.
    check_ranges: Vec<std::ops::Range<usize>>,
    edge_bit: Vec<usize>,
    /// Edge ids grouped per bit.
    bit_edges: Vec<Vec<usize>>,
    pub max_iters: usize,
    pub early_exit: bool,
}

impl BpDecoder {
    pub fn new(h: &ParityCheckMatrix, max_iters: usize) -> Self {
        let mut check_ranges = Vec::with_capacity(h.n_checks());
        let mut edge_bit = Vec::with_capacity(h.n_edges());
        let mut bit_edges = vec![Vec::new(); h.n_bits()];
        for check in h.checks() {
            let start = edge_bit.len();
            for &b in check {
                bit_edges[b].push(edge_bit.len());
                edge_bit.push(b);
            }
            check_ranges.push(start..edge_bit.len());
        }
        BpDecoder {
            n_bits: h.n_bits(),
            check_ranges,
            edge_bit,
            bit_edges,
            max_iters,
            early_exit: true,
        }
    }

    pub fn with_early_exit(mut self, early_exit: bool) -> Self {
        self.early_exit = early_exit;
        self
    }

    fn syndrome_ok(&self, llr: &[f64]) -> bool {
        self.check_ranges.iter().all(|range| {
            self.edge_bit[range.clone()]
                .iter()
                .filter(|&&b| llr[b] < 0.0)
                .count()
                % 2
                == 0
        })
    }

    /// Run belief propagation from prior LLRs. With `max_iters == 0` the
    /// prior comes back untouched.
    pub fn decode(&self, prior: &[f64]) -> BpOutput {
        assert_eq!(prior.len(), self.n_bits, "prior length");
        if self.max_iters == 0 {
            return BpOutput {
                posterior: prior.to_vec(),
                iterations: 0,
                syndrome_ok: self.syndrome_ok(prior),
            };
        }
        let n_edges = self.edge_bit.len();
        let mut c2v = vec![0.0f64; n_edges];
        let mut tanhs = vec![0.0f64; n_edges];
        let mut posterior: Vec<f64> = prior.iter().map(|&l| clip_llr(l)).collect();
        let mut iterations = 0;
        let mut syndrome_ok = false;

        // tanh(x/2) saturates to +-1 near |x| = 38; keep atanh finite.
        let tmax = (0.5 * LLR_CLIP).tanh();

        for _ in 0..self.max_iters {
            iterations += 1;
            // bit -> check: total minus own incoming message
            for (e, &b) in self.edge_bit.iter().enumerate() {
                let v2c = clip_llr(posterior[b] - c2v[e]);
                tanhs[e] = (0.5 * v2c).tanh();
            }
            // check -> bit, leave-one-out product via prefix/suffix sweeps
            for range in &self.check_ranges {
                let mut prefix = 1.0;
                for e in range.clone() {
                    c2v[e] = prefix;
                    prefix *= tanhs[e];
                }
                let mut suffix = 1.0;
                for e in range.clone().rev() {
                    let prod = (c2v[e] * suffix).clamp(-tmax, tmax);
                    c2v[e] = 2.0 * prod.atanh();
                    suffix *= tanhs[e];
                }
            }
            for (b, edges) in self.bit_edges.iter().enumerate() {
                let sum: f64 = edges.iter().map(|&e| c2v[e]).sum();
                posterior[b] = clip_llr(prior[b] + sum);
            }
            syndrome_ok = self.syndrome_ok(&posterior);
            if self.early_exit && syndrome_ok {
                break;
            }
        }
        BpOutput {
            posterior,
            iterations,
            syndrome_ok,
        }
    }
}

/// Hard decision: 0 for `L >= 0`, 1 otherwise.
pub fn hard_decision(llr: &[f64]) -> Vec<u8> {
    llr.iter().map(|&l| u8::from(l < 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::ldpc::LdpcCode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive bitwise MAP marginals over all codewords of a small code.
    pub(crate) fn brute_force_marginals(codewords: &[Vec<u8>], prior: &[f64]) -> Vec<f64> {
        let n = prior.len();
        let log_w: Vec<f64> = codewords
            .iter()
            .map(|c| {
                c.iter()
                    .zip(prior)
                    .map(|(&b, &l)| if b == 0 { 0.5 * l } else { -0.5 * l })
                    .sum()
            })
            .collect();
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (0..n)
            .map(|v| {
                let (mut p0, mut p1) = (0.0, 0.0);
                for (c, &lw) in codewords.iter().zip(&log_w) {
                    let w = (lw - top).exp();
                    if c[v] == 0 {
                        p0 += w;
                    } else {
                        p1 += w;
                    }
                }
                (p0 / p1).ln()
            })
            .collect()
    }

    fn all_codewords(code: &LdpcCode) -> Vec<Vec<u8>> {
        (0..1u32 << code.k())
            .map(|v| {
                let info: Vec<u8> = (0..code.k()).map(|i| ((v >> i) & 1) as u8).collect();
                code.encode_bits(&info).unwrap()
            })
            .collect()
    }

    fn tree_code() -> ParityCheckMatrix {
        // Checks linked as a tree through shared bits 1, 2, 4, 6.
        ParityCheckMatrix::new(
            10,
            vec![
                vec![0, 1, 2],
                vec![2, 3, 4],
                vec![4, 5, 6],
                vec![1, 7, 8],
                vec![6, 9],
            ],
        )
        .unwrap()
    }

    #[test]
    fn hard_decision_boundary() {
        assert_eq!(hard_decision(&[3.0, -3.0, 0.0]), vec![0, 1, 0]);
    }

    #[test]
    fn tree_code_matches_exhaustive_marginals() {
        let h = tree_code();
        let code = LdpcCode::new(h.clone()).unwrap();
        let words = all_codewords(&code);
        let dec = BpDecoder::new(&h, 20).with_early_exit(false);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let prior: Vec<f64> = (0..10).map(|_| rng.random_range(-4.0..4.0)).collect();
            let bp = dec.decode(&prior).posterior;
            let exact = brute_force_marginals(&words, &prior);
            for (a, b) in bp.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn saturated_consistent_input_exits_immediately() {
        let code = LdpcCode::default_code();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<u8> = (0..150).map(|_| rng.random::<bool>() as u8).collect();
        let word = code.encode_bits(&info).unwrap();
        let prior: Vec<f64> = word.iter().map(|&b| if b == 0 { 30.0 } else { -30.0 }).collect();
        let out = BpDecoder::new(code.parity_check(), 50).decode(&prior);
        assert_eq!(out.iterations, 1);
        assert!(out.syndrome_ok);
        assert_eq!(hard_decision(&out.posterior), word);
    }

    #[test]
    fn corrects_one_weak_flipped_bit() {
        let code = LdpcCode::default_code();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let info: Vec<u8> = (0..150).map(|_| rng.random::<bool>() as u8).collect();
        let word = code.encode_bits(&info).unwrap();
        let mut prior: Vec<f64> = word.iter().map(|&b| if b == 0 { 8.0 } else { -8.0 }).collect();
        prior[37] = if word[37] == 0 { -2.0 } else { 2.0 };
        let out = BpDecoder::new(code.parity_check(), 50).decode(&prior);
        assert!(out.syndrome_ok);
        assert_eq!(hard_decision(&out.posterior), word);
    }

    #[test]
    fn zero_prior_is_a_fixed_point() {
        let code = LdpcCode::default_code();
        let out = BpDecoder::new(code.parity_check(), 50).decode(&[0.0; 300]);
        assert!(out.posterior.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn zero_iterations_return_the_prior() {
        let code = LdpcCode::default_code();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prior: Vec<f64> = (0..300).map(|_| rng.random_range(-5.0..5.0)).collect();
        let out = BpDecoder::new(code.parity_check(), 0).decode(&prior);
        assert_eq!(out.posterior, prior);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn more_confidence_never_hurts_on_toy_code() {
        // 20-bit circulant (2,4) code: bit b < 10 joins checks {b-1, b}, bit
        // 10 + j joins {j-3, j}, so no two checks share two bits. Compare BP
        // and exhaustive MAP errors as correct-sign priors are scaled up.
        let checks = (0..10)
            .map(|c| vec![c, (c + 1) % 10, 10 + c, 10 + (c + 3) % 10])
            .collect();
        let h = ParityCheckMatrix::new(20, checks).unwrap();
        assert!(h.has_girth_at_least_6());
        let words: Vec<Vec<u8>> = (0..1u32 << 20)
            .map(|v| (0..20).map(|i| ((v >> i) & 1) as u8).collect::<Vec<u8>>())
            .filter(|w| h.is_codeword(w))
            .collect();
        assert_eq!(words.len(), 1 << 11);
        let dec = BpDecoder::new(&h, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let word = &words[rng.random_range(0..words.len())];
            let sign: Vec<f64> = word.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
            let noisy: Vec<f64> = sign
                .iter()
                .map(|s| 2.0 * s + rng.random_range(-3.0..3.0))
                .collect();
            let errors = |soft: &[f64]| {
                hard_decision(soft)
                    .iter()
                    .zip(word)
                    .filter(|(a, b)| a != b)
                    .count()
            };
            let mut last_bp = usize::MAX;
            let mut last_map = usize::MAX;
            for c in [1.0, 1.5, 2.0, 4.0] {
                let prior: Vec<f64> = noisy
                    .iter()
                    .zip(&sign)
                    .map(|(&l, &s)| if l * s > 0.0 { c * l } else { l })
                    .collect();
                let bp = errors(&dec.decode(&prior).posterior);
                let map = errors(&brute_force_marginals(&words, &prior));
                assert!(bp <= last_bp && map <= last_map, "c {c}: bp {bp} (was {last_bp}), map {map} (was {last_map})");
                last_bp = bp;
                last_map = map;
            }
        }
    }
}
