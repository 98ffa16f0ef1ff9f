//! Experiment world: user placement, large-scale fading, sporadic activity,
//! pilot sequences and payload bits.

mod config;

pub use config::SystemConfig;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, Error, Result, C64};

/// Path gain in dB at `distance_km` from the base station,
/// `-128.1 - 36.7 log10(r)`.
pub fn path_loss(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::invalid(format!(
            "distance must be positive, got {distance_km}"
        )));
    }
    Ok(-128.1 - 36.7 * distance_km.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Distances and large-scale fading of every user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPopulation {
    /// Distance to the base station in km.
    pub distances: Vec<f64>,
    /// Linear power gain `beta_n`.
    pub path_gains: Vec<f64>,
}

impl UserPopulation {
    pub fn from_distances(distances: Vec<f64>) -> Result<Self> {
        let path_gains = distances
            .iter()
            .map(|&r| path_loss(r).map(db_to_linear))
            .collect::<Result<Vec<_>>>()?;
        Ok(UserPopulation {
            distances,
            path_gains,
        })
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Drop `n_users` uniformly over a disc of `radius_km` centred at the base
/// station.
pub fn sample_positions<R: Rng + ?Sized>(
    n_users: usize,
    radius_km: f64,
    rng: &mut R,
) -> Result<UserPopulation> {
    if !(radius_km > 0.0) {
        return Err(Error::invalid(format!(
            "radius must be positive, got {radius_km}"
        )));
    }
    // 1 - U lies in (0, 1], which keeps every distance strictly positive.
    let distances = (0..n_users)
        .map(|_| radius_km * (1.0 - rng.random::<f64>()).sqrt())
        .collect();
    UserPopulation::from_distances(distances)
}

/// Which users transmit in the current block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityPattern {
    pub indicators: Vec<bool>,
    /// Active user indices in increasing order.
    pub active_set: Vec<usize>,
}

impl ActivityPattern {
    pub fn from_active_set(n_users: usize, mut active_set: Vec<usize>) -> Result<Self> {
        active_set.sort_unstable();
        active_set.dedup();
        if active_set.last().is_some_and(|&n| n >= n_users) {
            return Err(Error::invalid("active user index out of range"));
        }
        let mut indicators = vec![false; n_users];
        for &n in &active_set {
            indicators[n] = true;
        }
        Ok(ActivityPattern {
            indicators,
            active_set,
        })
    }

    pub fn n_users(&self) -> usize {
        self.indicators.len()
    }

    pub fn n_active(&self) -> usize {
        self.active_set.len()
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.indicators[n]
    }
}

/// Pick exactly `n_active` of `n_users` uniformly without replacement.
pub fn sample_activity<R: Rng + ?Sized>(
    n_users: usize,
    n_active: usize,
    rng: &mut R,
) -> Result<ActivityPattern> {
    if n_active > n_users {
        return Err(Error::invalid(format!(
            "cannot activate {n_active} of {n_users} users"
        )));
    }
    let set = index::sample(rng, n_users, n_active).into_vec();
    ActivityPattern::from_active_set(n_users, set)
}

/// Pilot sequences, one row per user.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix(pub CMatrix);

impl PilotMatrix {
    pub fn n_users(&self) -> usize {
        self.0.nrows()
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// Draw a circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let scale = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}

/// i.i.d. CN(0, 1) pilot entries, `n_users x pilot_len`.
pub fn gen_pilots<R: Rng + ?Sized>(
    n_users: usize,
    pilot_len: usize,
    rng: &mut R,
) -> Result<PilotMatrix> {
    if pilot_len == 0 {
        return Err(Error::invalid("pilot length must be at least 1"));
    }
    // Filled row by row so the draw order does not depend on storage order.
    let mut m = CMatrix::zeros(n_users, pilot_len);
    for n in 0..n_users {
        for l in 0..pilot_len {
            m[(n, l)] = complex_gaussian(rng, 1.0);
        }
    }
    Ok(PilotMatrix(m))
}

/// Uniform payload bits, one block per active user.
pub fn gen_payload<R: Rng + ?Sized>(
    n_active: usize,
    payload_bits: usize,
    rng: &mut R,
) -> Result<Vec<Vec<u8>>> {
    if payload_bits == 0 {
        return Err(Error::invalid("payload must have at least one bit"));
    }
    Ok((0..n_active)
        .map(|_| (0..payload_bits).map(|_| rng.random::<bool>() as u8).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss(1.0).unwrap(), -128.1);
        assert!((path_loss(0.5).unwrap() - -117.052_152).abs() < 1e-3);
        assert!((path_loss(0.1).unwrap() - -91.4).abs() < 1e-3);
        assert!(path_loss(0.0).is_err());
        assert!(path_loss(-1.0).is_err());
    }

    #[test]
    fn positions_inside_disc_with_radial_mean() {
        let pop = sample_positions(10_000, 0.5, &mut rng(1)).unwrap();
        assert!(pop.distances.iter().all(|&r| r > 0.0 && r <= 0.5));
        let mean = pop.distances.iter().sum::<f64>() / 10_000.0;
        // uniform disc: E[r] = 2R/3
        assert!((mean / (2.0 * 0.5 / 3.0) - 1.0).abs() < 0.02, "mean {mean}");
        for (r, b) in pop.distances.iter().zip(&pop.path_gains) {
            assert!((linear_to_db(*b) - path_loss(*r).unwrap()).abs() < 1e-9);
        }
        let one = sample_positions(1, 0.5, &mut rng(2)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(sample_positions(3, 0.0, &mut rng(2)).is_err());
    }

    #[test]
    fn activity_counts_are_exact() {
        assert!(sample_activity(200, 0, &mut rng(0)).unwrap().active_set.is_empty());
        let full = sample_activity(5, 5, &mut rng(0)).unwrap();
        assert!(full.indicators.iter().all(|&u| u));
        assert!(sample_activity(3, 4, &mut rng(0)).is_err());

        let mut hits = vec![0usize; 200];
        let mut r = rng(3);
        for _ in 0..10_000 {
            let a = sample_activity(200, 40, &mut r).unwrap();
            assert_eq!(a.n_active(), 40);
            for &n in &a.active_set {
                hits[n] += 1;
            }
        }
        let total: usize = hits.iter().sum();
        assert_eq!(total, 400_000);
        // Per-user frequency K/N = 0.2 with standard error 0.004, so +-0.01
        // is a 2.5 sigma band: nearly every user falls inside, none far out.
        let devs: Vec<f64> = hits.iter().map(|&h| (h as f64 / 1e4 - 0.2).abs()).collect();
        let inside = devs.iter().filter(|&&d| d <= 0.01).count();
        assert!(inside >= 190, "{inside} of 200 users within 0.01");
        assert!(devs.iter().all(|&d| d < 0.02));
    }

    #[test]
    fn pilots_shape_power_determinism() {
        let p = gen_pilots(200, 50, &mut rng(7)).unwrap();
        assert_eq!((p.n_users(), p.len()), (200, 50));
        let q = gen_pilots(200, 50, &mut rng(7)).unwrap();
        assert_eq!(p, q);
        let power = p.0.iter().map(|z| z.norm_sqr()).sum::<f64>() / 10_000.0;
        assert!((power - 1.0).abs() < 0.05, "power {power}");
        for a in 0..200 {
            for b in a + 1..200 {
                assert_ne!(p.0.row(a), p.0.row(b));
            }
        }
        assert!(gen_pilots(3, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn payload_bits() {
        let one = gen_payload(1, 142, &mut rng(9)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 142);
        let many = gen_payload(1000, 100, &mut rng(9)).unwrap();
        let ones: usize = many.iter().flatten().map(|&b| b as usize).sum();
        assert!((ones as f64 / 1e5 - 0.5).abs() < 0.01);
        assert_eq!(many, gen_payload(1000, 100, &mut rng(9)).unwrap());
        assert!(gen_payload(1, 0, &mut rng(0)).is_err());
    }

    proptest! {
        #[test]
        fn path_loss_strictly_decreasing(a in 1e-4f64..10.0, b in 1e-4f64..10.0) {
            prop_assume!(a < b);
            prop_assert!(path_loss(a).unwrap() > path_loss(b).unwrap());
        }

        #[test]
        fn db_round_trip(x in 1e-20f64..1e20) {
            prop_assert!((db_to_linear(linear_to_db(x)) / x - 1.0).abs() < 1e-12);
            prop_assert!((dbm_to_watts(watts_to_dbm(x)) / x - 1.0).abs() < 1e-12);
        }
    }
}
