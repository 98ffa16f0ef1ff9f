//! Block-fading uplink channel and the received block `Y = sqrt(g) H X + N`.

use std::io::{Read, Write};

use rand::Rng;

use crate::scenario::{complex_gaussian, ActivityPattern, PilotMatrix, UserPopulation};
use crate::{CMatrix, Error, Result, C64};

/// One quasi-static channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Small-scale fading `alpha_n` as columns, `M x N`.
    pub small_scale: CMatrix,
    /// Effective channel `h_n = u_n sqrt(beta_n) alpha_n`, `M x N`.
    pub effective: CMatrix,
}

impl ChannelRealization {
    pub fn n_antennas(&self) -> usize {
        self.effective.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.effective.ncols()
    }
}

pub fn make_channel<R: Rng + ?Sized>(
    activity: &ActivityPattern,
    population: &UserPopulation,
    n_antennas: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let n_users = activity.n_users();
    if population.len() != n_users {
        return Err(Error::invalid(format!(
            "activity covers {n_users} users, population {}",
            population.len()
        )));
    }
    let mut small_scale = CMatrix::zeros(n_antennas, n_users);
    let mut effective = CMatrix::zeros(n_antennas, n_users);
    for n in 0..n_users {
        let amp = population.path_gains[n].sqrt();
        for m in 0..n_antennas {
            let a = complex_gaussian(rng, 1.0);
            small_scale[(m, n)] = a;
            if activity.is_active(n) {
                effective[(m, n)] = a * amp;
            }
        }
    }
    Ok(ChannelRealization {
        small_scale,
        effective,
    })
}

/// Symbols sent by all users over one block, `N x T` with the pilot phase
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBlock {
    pub symbols: CMatrix,
    pub pilot_len: usize,
}

impl TransmitBlock {
    /// Stack pilots and data. `data` holds one symbol row per active user in
    /// the order of `activity.active_set`; inactive users send zeros in the
    /// data phase.
    pub fn assemble(
        pilots: &PilotMatrix,
        activity: &ActivityPattern,
        data: &[Vec<C64>],
    ) -> Result<Self> {
        let n_users = pilots.n_users();
        if activity.n_users() != n_users {
            return Err(Error::invalid("activity and pilots disagree on N"));
        }
        if data.len() != activity.n_active() {
            return Err(Error::invalid(format!(
                "{} data rows for {} active users",
                data.len(),
                activity.n_active()
            )));
        }
        let data_len = data.first().map_or(0, Vec::len);
        if data.iter().any(|row| row.len() != data_len) {
            return Err(Error::invalid("data rows differ in length"));
        }
        let pilot_len = pilots.len();
        let mut symbols = CMatrix::zeros(n_users, pilot_len + data_len);
        symbols
            .columns_mut(0, pilot_len)
            .copy_from(pilots.as_matrix());
        for (&n, row) in activity.active_set.iter().zip(data) {
            for (t, &x) in row.iter().enumerate() {
                symbols[(n, pilot_len + t)] = x;
            }
        }
        Ok(TransmitBlock { symbols, pilot_len })
    }

    pub fn block_len(&self) -> usize {
        self.symbols.ncols()
    }

    /// The data part `X_d`, `N x L_d`.
    pub fn data_part(&self) -> CMatrix {
        let ld = self.block_len() - self.pilot_len;
        self.symbols.columns(self.pilot_len, ld).into_owned()
    }
}

/// Samples received over one block at all antennas, `M x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub samples: CMatrix,
}

/// `Y = sqrt(tx_power) H X + N` with `N` i.i.d. CN(0, noise_var).
pub fn transmit<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    block: &TransmitBlock,
    tx_power: f64,
    noise_var: f64,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    let h = &channel.effective;
    let x = &block.symbols;
    if h.ncols() != x.nrows() {
        return Err(Error::invalid(format!(
            "channel has {} users, block has {}",
            h.ncols(),
            x.nrows()
        )));
    }
    if !(tx_power >= 0.0 && noise_var >= 0.0) {
        return Err(Error::invalid("powers must be non-negative"));
    }
    let mut y = (h * x) * C64::from(tx_power.sqrt());
    if noise_var > 0.0 {
        // column-major walk: antenna index fastest, then symbol
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    Ok(ReceivedBlock { samples: y })
}

/// Write a complex matrix as CSV, one row per matrix row, each entry as a
/// `re,im` pair.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    for i in 0..m.nrows() {
        let mut line = String::new();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            let z = m[(i, j)];
            line.push_str(&format!("{},{}", z.re, z.im));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Little-endian binary: `rows: u64`, `cols: u64`, then row-major
/// `(re, im)` f64 pairs.
pub fn write_matrix_bin<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_bin<R: Read>(mut r: R) -> Result<CMatrix> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

/// Dump `(H, X, Y)` of one trial into `dir` as `H.csv`, `X.csv`, `Y.csv`
/// and a single `trial.bin` holding the three matrices back to back.
pub fn dump_trial(
    dir: &std::path::Path,
    channel: &ChannelRealization,
    block: &TransmitBlock,
    received: &ReceivedBlock,
) -> Result<()> {
    use std::fs::File;
    use std::io::BufWriter;
    std::fs::create_dir_all(dir)?;
    let mats = [
        ("H", &channel.effective),
        ("X", &block.symbols),
        ("Y", &received.samples),
    ];
    for (name, m) in mats {
        write_matrix_csv(BufWriter::new(File::create(dir.join(format!("{name}.csv")))?), m)?;
    }
    let mut bin = BufWriter::new(File::create(dir.join("trial.bin"))?);
    for (_, m) in mats {
        write_matrix_bin(&mut bin, m)?;
    }
    bin.flush()?;
    Ok(())
}
