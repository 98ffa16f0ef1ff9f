//! Sparse parity-check matrices, alist exchange and systematic encoding.

use std::fmt::Write as _;

use crate::{Error, Result};

use super::crc::CodeBlock;

/// Sparse binary parity-check matrix stored by rows and by columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n_bits: usize,
    checks: Vec<Vec<usize>>,
    bits: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Build from the bit indices of every check.
    pub fn new(n_bits: usize, mut checks: Vec<Vec<usize>>) -> Result<Self> {
        for check in &mut checks {
            check.sort_unstable();
            if check.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Code("repeated bit in a check".into()));
            }
            if check.last().is_some_and(|&b| b >= n_bits) {
                return Err(Error::Code("check references a bit out of range".into()));
            }
        }
        let mut bits = vec![Vec::new(); n_bits];
        for (c, check) in checks.iter().enumerate() {
            for &b in check {
                bits[b].push(c);
            }
        }
        Ok(ParityCheckMatrix {
            n_bits,
            checks,
            bits,
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn n_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    /// Checks attached to each bit.
    pub fn bit_adjacency(&self) -> &[Vec<usize>] {
        &self.bits
    }

    pub fn n_edges(&self) -> usize {
        self.checks.iter().map(Vec::len).sum()
    }

    /// True when every check is satisfied by `word`.
    pub fn is_codeword(&self, word: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|check| check.iter().fold(0u8, |acc, &b| acc ^ word[b]) & 1 == 0)
    }

    /// `H c^T` over GF(2).
    pub fn syndrome(&self, word: &[u8]) -> Vec<u8> {
        self.checks
            .iter()
            .map(|check| check.iter().fold(0u8, |acc, &b| acc ^ word[b]) & 1)
            .collect()
    }

    /// True when no two checks share more than one bit (no 4-cycles).
    pub fn has_girth_at_least_6(&self) -> bool {
        for bit_checks in &self.bits {
            for (i, &a) in bit_checks.iter().enumerate() {
                for &b in &bit_checks[i + 1..] {
                    let shared = intersection_len(&self.checks[a], &self.checks[b]);
                    if shared > 1 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Parse the alist format: dimensions, maximum degrees, degree lists,
    /// then column and row adjacency with 1-based indices (zero padding
    /// allowed).
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut nums = text.split_ascii_whitespace().map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::Code(format!("bad alist token {tok:?}")))
        });
        let mut next = || {
            nums.next()
                .unwrap_or_else(|| Err(Error::Code("alist ended early".into())))
        };
        let n = next()?;
        let m = next()?;
        let max_col = next()?;
        let max_row = next()?;
        let col_deg = (0..n).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let row_deg = (0..m).map(|_| next()).collect::<Result<Vec<_>>>()?;
        if col_deg.iter().any(|&d| d > max_col) || row_deg.iter().any(|&d| d > max_row) {
            return Err(Error::Code("degree exceeds declared maximum".into()));
        }
        let read_lists = |degs: &[usize], next: &mut dyn FnMut() -> Result<usize>| {
            degs.iter()
                .map(|&deg| {
                    let mut list = Vec::with_capacity(deg);
                    // Some writers pad every list to the maximum degree, some
                    // do not; consume `deg` non-zero entries and skip zeros.
                    while list.len() < deg {
                        let v = next()?;
                        if v != 0 {
                            list.push(v - 1);
                        }
                    }
                    Ok(list)
                })
                .collect::<Result<Vec<Vec<usize>>>>()
        };
        let cols = read_lists(&col_deg, &mut next)?;
        let rows = read_lists(&row_deg, &mut next)?;
        let h = ParityCheckMatrix::new(n, rows)?;
        // Column lists must agree with the row lists.
        for (b, list) in cols.into_iter().enumerate() {
            let mut list = list;
            list.sort_unstable();
            if list.iter().any(|&c| c >= m) || list != h.bits[b] {
                return Err(Error::Code(format!(
                    "column {} disagrees with the row lists",
                    b + 1
                )));
            }
        }
        Ok(h)
    }

    /// Write the alist format with zero padding to the maximum degree.
    pub fn to_alist(&self) -> String {
        let max_col = self.bits.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.checks.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = usize>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(out, "{} {}", self.n_bits, self.n_checks());
        let _ = writeln!(out, "{max_col} {max_row}");
        let _ = writeln!(out, "{}", join(&mut self.bits.iter().map(Vec::len)));
        let _ = writeln!(out, "{}", join(&mut self.checks.iter().map(Vec::len)));
        for (lists, max) in [(&self.bits, max_col), (&self.checks, max_row)] {
            for list in lists {
                let mut row: Vec<usize> = list.iter().map(|&x| x + 1).collect();
                row.resize(max, 0);
                let _ = writeln!(out, "{}", join(&mut row.into_iter()));
            }
        }
        out
    }
}

fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Packed GF(2) row.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitRow(Vec<u64>);

impl BitRow {
    fn zeros(len: usize) -> Self {
        BitRow(vec![0; len.div_ceil(64)])
    }

    fn get(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn dot(&self, other: &BitRow) -> u8 {
        let ones: u32 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        (ones & 1) as u8
    }
}

/// Systematic LDPC code: the parity-check matrix plus an encoder derived by
/// Gaussian elimination.
///
/// Information bits occupy the non-pivot columns of the reduced matrix
/// (`info_positions`); each parity bit is a GF(2) combination of them.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: ParityCheckMatrix,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    parity_rules: Vec<BitRow>,
}

impl LdpcCode {
    /// Derive the encoder. Fails when `h` does not have full row rank.
    pub fn new(h: ParityCheckMatrix) -> Result<Self> {
        let n = h.n_bits();
        let m = h.n_checks();
        let mut rows: Vec<BitRow> = h
            .checks()
            .iter()
            .map(|check| {
                let mut r = BitRow::zeros(n);
                for &b in check {
                    r.set(b);
                }
                r
            })
            .collect();

        // Eliminate from the last column backwards so that, for the usual
        // constructions, parity bits gather at the end of the codeword.
        let mut pivots: Vec<(usize, usize)> = Vec::with_capacity(m);
        let mut next_row = 0;
        for col in (0..n).rev() {
            if next_row == m {
                break;
            }
            let Some(found) = (next_row..m).find(|&r| rows[r].get(col)) else {
                continue;
            };
            rows.swap(next_row, found);
            let pivot = rows[next_row].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != next_row && row.get(col) {
                    row.xor_assign(&pivot);
                }
            }
            pivots.push((next_row, col));
            next_row += 1;
        }
        if pivots.len() < m {
            return Err(Error::Code(format!(
                "rank {} below the {} checks",
                pivots.len(),
                m
            )));
        }

        let mut is_pivot = vec![false; n];
        for &(_, col) in &pivots {
            is_pivot[col] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info_positions.len();
        let mut parity_positions = Vec::with_capacity(m);
        let mut parity_rules = Vec::with_capacity(m);
        for &(r, col) in &pivots {
            let mut rule = BitRow::zeros(k);
            for (j, &c) in info_positions.iter().enumerate() {
                if rows[r].get(c) {
                    rule.set(j);
                }
            }
            parity_positions.push(col);
            parity_rules.push(rule);
        }
        Ok(LdpcCode {
            h,
            info_positions,
            parity_positions,
            parity_rules,
        })
    }

    /// The shipped regular (3,6) code with 150 checks on 300 bits.
    pub fn default_code() -> Self {
        let h = ParityCheckMatrix::from_alist(DEFAULT_ALIST)
            .expect("bundled alist parses");
        LdpcCode::new(h).expect("bundled code has full rank")
    }

    pub fn parity_check(&self) -> &ParityCheckMatrix {
        &self.h
    }

    /// Codeword length `N_c`.
    pub fn n(&self) -> usize {
        self.h.n_bits()
    }

    /// Information length `N_d`.
    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode_bits(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(Error::invalid(format!(
                "encoder takes {} bits, got {}",
                self.k(),
                info.len()
            )));
        }
        let mut packed = BitRow::zeros(self.k());
        for (j, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                packed.set(j);
            }
        }
        let mut word = vec![0u8; self.n()];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            word[pos] = b & 1;
        }
        for (&pos, rule) in self.parity_positions.iter().zip(&self.parity_rules) {
            word[pos] = rule.dot(&packed);
        }
        Ok(word)
    }

    pub fn encode(&self, block: &CodeBlock) -> Result<Vec<u8>> {
        self.encode_bits(block.bits())
    }

    /// Read the information bits back out of a (hard-decided) codeword.
    pub fn extract_info(&self, word: &[u8]) -> CodeBlock {
        CodeBlock::from_bits(self.info_positions.iter().map(|&p| word[p]).collect())
    }
}

/// Regular (3,6) code, 150 x 300, built by progressive edge growth. Version
/// 1; see [`super::peg::DEFAULT_PEG_SEED`].
pub const DEFAULT_ALIST: &str = include_str!("../../assets/ldpc_3_6_300_v1.alist");
