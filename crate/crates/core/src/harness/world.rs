//! One seeded trial world: users, activity, pilots, payloads, channel and
//! the received block.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{make_channel, transmit, ChannelRealization, ReceivedBlock, TransmitBlock};
use crate::coding::{crc8_attach, LdpcCode};
use crate::modem::Constellation;
use crate::scenario::{
    gen_payload, gen_pilots, sample_activity, sample_positions, ActivityPattern, PilotMatrix,
    SystemConfig, UserPopulation,
};
use crate::Result;

#[derive(Debug, Clone)]
pub struct World {
    pub population: UserPopulation,
    pub activity: ActivityPattern,
    pub pilots: PilotMatrix,
    /// Payload bits per active user, in `activity.active_set` order.
    pub payloads: Vec<Vec<u8>>,
    pub block: TransmitBlock,
    pub channel: ChannelRealization,
    pub received: ReceivedBlock,
}

impl World {
    /// Transmitted payload of `user`, if active.
    pub fn payload_of(&self, user: usize) -> Option<&[u8]> {
        self.activity
            .active_set
            .binary_search(&user)
            .ok()
            .map(|i| self.payloads[i].as_slice())
    }
}

/// Seed of trial `trial` at sweep point `n_active`. Each `(K, trial)` pair
/// gets its own ChaCha stream under the master seed, so a trial's world
/// never depends on which other trials ran or in what order.
pub fn trial_rng(master_seed: u64, n_active: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((n_active as u64) << 40) ^ trial);
    rng
}

/// Draw a world with `cfg.n_active` active users.
pub fn generate_world(cfg: &SystemConfig, code: &LdpcCode, rng: &mut ChaCha8Rng) -> Result<World> {
    cfg.validate()?;
    let population = sample_positions(cfg.n_users, cfg.radius_km, rng)?;
    let activity = sample_activity(cfg.n_users, cfg.n_active, rng)?;
    let pilots = gen_pilots(cfg.n_users, cfg.pilot_len, rng)?;
    let payloads = gen_payload(cfg.n_active, cfg.payload_bits, rng)?;
    let qpsk = Constellation::qpsk();
    let data = payloads
        .iter()
        .map(|p| {
            let block = crc8_attach(p, cfg.payload_bits)?;
            Ok(qpsk.modulate(&code.encode(&block)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let block = TransmitBlock::assemble(&pilots, &activity, &data)?;
    let channel = make_channel(&activity, &population, cfg.n_antennas, rng)?;
    let received = transmit(&channel, &block, cfg.tx_power(), cfg.noise_var(), rng)?;
    Ok(World {
        population,
        activity,
        pilots,
        payloads,
        block,
        channel,
        received,
    })
}
