//! System configuration and its text loader.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::dbm_to_watts;

/// Scalar parameters of one simulated system.
///
/// Defaults reproduce the full-scale parameter table (N = 200, M = 64,
/// T = 200, L = 50, QPSK, rate-1/2 LDPC with CRC-8, 23 dBm over a
/// -169 dBm/Hz, 1 MHz channel). Quantities with a fixed relation to others
/// (data length, info bits, coded bits, powers in watts) are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_users: usize,
    pub n_active: usize,
    pub n_antennas: usize,
    pub block_len: usize,
    pub pilot_len: usize,
    pub payload_bits: usize,
    pub crc_bits: usize,
    pub bits_per_symbol: usize,
    pub tx_power_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
    /// Overrides the density x bandwidth noise power when set.
    pub noise_power_dbm: Option<f64>,
    pub radius_km: f64,
    pub threshold: f64,
    pub turbo_iters: usize,
    pub detector_iters: usize,
    pub detector_tol: f64,
    pub damping: f64,
    pub warmup_pilot_iters: usize,
    pub decoder_iters: usize,
    /// Activity prior used by the detector; `None` means `n_active / n_users`.
    pub lambda: Option<f64>,
    pub master_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_users: 200,
            n_active: 40,
            n_antennas: 64,
            block_len: 200,
            pilot_len: 50,
            payload_bits: 142,
            crc_bits: 8,
            bits_per_symbol: 2,
            tx_power_dbm: 23.0,
            noise_density_dbm_hz: -169.0,
            bandwidth_hz: 1e6,
            noise_power_dbm: None,
            radius_km: 0.5,
            threshold: 0.4,
            turbo_iters: 3,
            detector_iters: 100,
            detector_tol: 1e-5,
            damping: 0.3,
            warmup_pilot_iters: 10,
            decoder_iters: 50,
            lambda: None,
            master_seed: 0,
        }
    }
}

impl SystemConfig {
    /// Reduced desk-scale system: N = 50, M = 16, L = 20, T = 170.
    pub fn reduced() -> Self {
        SystemConfig {
            n_users: 50,
            n_active: 10,
            n_antennas: 16,
            block_len: 170,
            pilot_len: 20,
            ..SystemConfig::default()
        }
    }

    /// Data symbols per block, `T - L`.
    pub fn data_len(&self) -> usize {
        self.block_len.saturating_sub(self.pilot_len)
    }

    /// Code block length `N_d` (payload plus CRC).
    pub fn info_bits(&self) -> usize {
        self.payload_bits + self.crc_bits
    }

    /// Coded bits per block `N_c = L_d * log2|X|`.
    pub fn coded_bits(&self) -> usize {
        self.data_len() * self.bits_per_symbol
    }

    /// Transmit power in watts.
    pub fn tx_power(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Noise power per complex sample in dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_power_dbm
            .unwrap_or(self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10())
    }

    /// Noise power per complex sample in watts.
    pub fn noise_var(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm())
    }

    /// Activity prior handed to the detector, kept inside `(0, 1)` so that
    /// `K = 0` and `K = N` still give a usable logit.
    pub fn activity_prior(&self) -> f64 {
        self.lambda
            .unwrap_or(self.n_active as f64 / self.n_users as f64)
            .clamp(1e-6, 1.0 - 1e-6)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_users == 0 || self.n_antennas == 0 {
            return fail("n_users and n_antennas must be positive".into());
        }
        if self.n_active > self.n_users {
            return fail(format!(
                "n_active ({}) exceeds n_users ({})",
                self.n_active, self.n_users
            ));
        }
        if self.pilot_len == 0 || self.pilot_len >= self.block_len {
            return fail(format!(
                "pilot_len must lie in [1, block_len) (pilot_len {}, block_len {})",
                self.pilot_len, self.block_len
            ));
        }
        if self.payload_bits == 0 {
            return fail("payload_bits must be positive".into());
        }
        if self.bits_per_symbol != 2 {
            return fail("only QPSK (bits_per_symbol = 2) is supported".into());
        }
        if self.coded_bits() != 2 * self.info_bits() {
            return fail(format!(
                "rate-1/2 code needs coded bits {} = 2 x info bits {}",
                self.coded_bits(),
                self.info_bits()
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return fail(format!("damping {} outside (0, 1]", self.damping));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if let Some(lambda) = self.lambda {
            if !(lambda > 0.0 && lambda < 1.0) {
                return fail(format!("lambda {lambda} outside (0, 1)"));
            }
        }
        if !(self.radius_km > 0.0) {
            return fail("radius_km must be positive".into());
        }
        if !(self.detector_tol >= 0.0) {
            return fail("detector_tol must be non-negative".into());
        }
        Ok(())
    }

    /// Parse a flat configuration. Text starting with `{` is read as JSON,
    /// anything else as `key = value` lines (TOML). Missing keys keep their
    /// defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SystemConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_parameter_table() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_antennas, 64);
        assert_eq!(cfg.block_len, 200);
        assert_eq!(cfg.pilot_len, 50);
        assert_eq!(cfg.data_len(), 150);
        assert_eq!(cfg.payload_bits, 142);
        assert_eq!(cfg.info_bits(), 150);
        assert_eq!(cfg.coded_bits(), 300);
        assert_eq!(cfg.threshold, 0.4);
        assert_eq!(cfg.turbo_iters, 3);
        assert_eq!(cfg.detector_iters, 100);
        assert_eq!(cfg.detector_tol, 1e-5);
        assert_eq!(cfg.n_users, 200);
    }

    #[test]
    fn power_bookkeeping() {
        let cfg = SystemConfig::default();
        assert!((cfg.noise_power_dbm() - -109.0).abs() < 1e-12);
        assert!((cfg.tx_power() - 0.199_526_231_496_887_9).abs() < 1e-12);
        assert!((cfg.noise_var() / 1.258_925_411_794_167_2e-14 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_keeps_code_dimensions() {
        let cfg = SystemConfig::reduced();
        cfg.validate().unwrap();
        assert_eq!(cfg.data_len(), 150);
        assert_eq!(cfg.coded_bits(), 300);
    }

    #[test]
    fn parses_key_value_and_json() {
        let kv = "n_users = 50\nn_antennas = 16\nblock_len = 170\npilot_len = 20\n";
        let a = SystemConfig::parse(kv).unwrap();
        let b = SystemConfig::parse(
            r#"{"n_users": 50, "n_antennas": 16, "block_len": 170, "pilot_len": 20}"#,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_users, 50);
        assert_eq!(a.turbo_iters, 3);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SystemConfig::parse("n_active = 300").is_err());
        assert!(SystemConfig::parse("damping = 0.0").is_err());
        assert!(SystemConfig::parse("threshold = 1.5").is_err());
        assert!(SystemConfig::parse("pilot_len = 60").is_err());
        assert!(SystemConfig::parse("bogus_key = 1").is_err());
    }
}
