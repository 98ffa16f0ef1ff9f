//! Progressive edge growth for regular LDPC codes.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

use super::ldpc::ParityCheckMatrix;

/// Seed that produced the bundled 150 x 300 code.
pub const DEFAULT_PEG_SEED: u64 = 2021;

/// Grow a `(col_degree, row_degree)`-regular Tanner graph on `n_bits` bits.
///
/// Each new edge of a bit goes to the check that is farthest from it in the
/// current graph (unreachable counts as infinitely far), breaking ties by
/// lowest check degree and then by a seeded shuffle.
pub fn peg_regular(
    n_bits: usize,
    col_degree: usize,
    row_degree: usize,
    seed: u64,
) -> Result<ParityCheckMatrix> {
    if row_degree == 0 || (n_bits * col_degree) % row_degree != 0 {
        return Err(Error::Code(format!(
            "{n_bits} bits of degree {col_degree} do not fill checks of degree {row_degree}"
        )));
    }
    let n_checks = n_bits * col_degree / row_degree;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check_adj: Vec<Vec<usize>> = vec![Vec::new(); n_checks];
    let mut bit_adj: Vec<Vec<usize>> = vec![Vec::new(); n_bits];
    let mut order: Vec<usize> = (0..n_checks).collect();

    for bit in 0..n_bits {
        for _ in 0..col_degree {
            let dist = check_distances(bit, &bit_adj, &check_adj);
            order.shuffle(&mut rng);
            let best = order
                .iter()
                .copied()
                .filter(|&c| check_adj[c].len() < row_degree && !bit_adj[bit].contains(&c))
                .max_by_key(|&c| (dist[c], std::cmp::Reverse(check_adj[c].len())))
                .ok_or_else(|| Error::Code("ran out of free check sockets".into()))?;
            check_adj[best].push(bit);
            bit_adj[bit].push(best);
        }
    }
    ParityCheckMatrix::new(n_bits, check_adj)
}

/// Tanner-graph distance (in edges) from `bit` to every check; `usize::MAX`
/// when unreachable.
fn check_distances(bit: usize, bit_adj: &[Vec<usize>], check_adj: &[Vec<usize>]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; check_adj.len()];
    let mut seen_bits = vec![false; bit_adj.len()];
    seen_bits[bit] = true;
    let mut queue = VecDeque::new();
    for &c in &bit_adj[bit] {
        dist[c] = 1;
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        for &b in &check_adj[c] {
            if seen_bits[b] {
                continue;
            }
            seen_bits[b] = true;
            for &c2 in &bit_adj[b] {
                if dist[c2] == usize::MAX {
                    dist[c2] = dist[c] + 2;
                    queue.push_back(c2);
                }
            }
        }
    }
    dist
}
