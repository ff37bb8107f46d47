//! Full-scale BER setups: 128 receive antennas, 16 to 128 users, 4-, 16-
//! and 64-QAM. These run 1000 trials per SNR point at up to 128×128 and
//! take a long time.

use std::path::PathBuf;

use crate::detector::DetectorParams;
use crate::signal::Modulation;

use super::config::{DetectorKind, ExperimentConfig};

pub const PRESET_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub receive_antennas: usize,
    pub users: usize,
    pub layers: usize,
    pub rho: f64,
    pub alphas: &'static [f64],
}

const fn preset(name: &'static str, users: usize, layers: usize, alphas: &'static [f64], rho: f64) -> Preset {
    Preset {
        name,
        receive_antennas: 128,
        users,
        layers,
        rho,
        alphas,
    }
}

pub const PRESETS: [Preset; 12] = [
    preset("fig1a", 16, 1, &[80.0], 120.0),
    preset("fig1b", 32, 1, &[80.0], 120.0),
    preset("fig1c", 64, 1, &[80.0], 120.0),
    preset("fig1d", 128, 1, &[80.0], 120.0),
    preset("fig1e", 16, 2, &[8.0, 30.0], 16.0),
    preset("fig1f", 32, 2, &[9.0, 40.0], 20.0),
    preset("fig1g", 64, 2, &[12.0, 64.0], 20.0),
    preset("fig1h", 128, 2, &[10.0, 60.0], 16.0),
    preset("fig1i", 16, 3, &[22.0, 17.0, 95.0], 96.0),
    preset("fig1j", 32, 3, &[2.0, 2.0, 10.5], 9.0),
    preset("fig1k", 64, 3, &[22.0, 22.5, 85.0], 44.0),
    preset("fig1l", 128, 3, &[2.75, 2.25, 10.5], 5.0),
];

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    /// SNR grid in dB, 2 dB steps over a range that suits the modulation.
    pub fn snr_grid_db(&self) -> Vec<f64> {
        let start = match self.layers {
            1 => 0,
            2 => 6,
            _ => 12,
        };
        (0..7).map(|i| f64::from(start + 2 * i)).collect()
    }

    pub fn params(&self) -> DetectorParams {
        DetectorParams::new(self.rho, self.alphas.to_vec())
    }

    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            receive_antennas: self.receive_antennas,
            users: self.users,
            modulation: Modulation::new(self.layers).expect("preset layer count is valid"),
            snr_grid_db: self.snr_grid_db(),
            trials: PRESET_TRIALS,
            detectors: vec![DetectorKind::Psadmm, DetectorKind::BoxAdmm, DetectorKind::Mmse, DetectorKind::Zf],
            psadmm: Some(self.params()),
            box_admm: Some(self.params().without_penalty()),
            master_seed: 0,
            verify: false,
            output: PathBuf::from(format!("{}.csv", self.name)),
        }
    }

    /// `fig1a  B=128 U=16 Q=1 (4-QAM)  rho=120 alpha=(80)`.
    pub fn describe(&self) -> String {
        let alphas: Vec<String> = self.alphas.iter().map(|a| a.to_string()).collect();
        format!(
            "{}  B={} U={} Q={} ({}-QAM)  rho={} alpha=({})",
            self.name,
            self.receive_antennas,
            self.users,
            self.layers,
            1usize << (2 * self.layers),
            self.rho,
            alphas.join(", ")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caption_parameters() {
        let a = find_preset("fig1a").unwrap();
        assert_eq!((a.receive_antennas, a.users, a.layers, a.rho), (128, 16, 1, 120.0));
        assert_eq!(a.alphas, &[80.0]);
        let k = find_preset("fig1k").unwrap();
        assert_eq!((k.users, k.layers, k.rho), (64, 3, 44.0));
        assert_eq!(k.alphas, &[22.0, 22.5, 85.0]);
        assert!(find_preset("fig1m").is_none());
        assert_eq!(a.describe(), "fig1a  B=128 U=16 Q=1 (4-QAM)  rho=120 alpha=(80)");
    }

    #[test]
    fn every_preset_validates() {
        for p in &PRESETS {
            let c = p.config();
            c.validate().unwrap();
            assert_eq!(c.psadmm.as_ref().unwrap().alphas.len(), p.layers);
            assert_eq!(c.trials, 1000);
        }
    }
}
