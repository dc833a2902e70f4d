//! Multipath channel realizations.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub kind: ChannelKind,
    pub paths: Vec<Path>,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
}

impl ChannelRealization {
    pub fn awgn(snr_db: Option<f64>) -> Self {
        ChannelRealization {
            kind: ChannelKind::Awgn,
            paths: alloc::vec![Path { gain: Complex64::new(1.0, 0.0), delay: 0.0 }],
            snr_db,
        }
    }

    /// Rayleigh fading: 1 to 5 paths with circular Gaussian gains whose mean
    /// power decays exponentially with delay, normalized to unit total power.
    pub fn rayleigh<R: Rng + ?Sized>(rng: &mut R, snr_db: Option<f64>, rms_delay_s: f64) -> Self {
        let n_paths = rng.gen_range(1..=5usize);
        let delay_dist = Exp::new(1.0 / rms_delay_s).expect("positive delay spread");
        let mut delays: Vec<f64> = (0..n_paths).map(|_| delay_dist.sample(rng)).collect();
        delays.sort_by(f64::total_cmp);
        delays[0] = 0.0;
        let mut paths: Vec<Path> = delays
            .into_iter()
            .map(|delay| {
                let std = libm::sqrt(libm::exp(-delay / rms_delay_s) / 2.0);
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Path { gain: Complex64::new(re * std, im * std), delay }
            })
            .collect();
        let power: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
        if power > 0.0 {
            let k = 1.0 / libm::sqrt(power);
            for p in &mut paths {
                p.gain *= k;
            }
        }
        ChannelRealization { kind: ChannelKind::Rayleigh, paths, snr_db }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.paths.is_empty() {
            return Err(SignalError::Domain("channel needs at least one path"));
        }
        if self.paths.iter().any(|p| !(p.delay >= 0.0)) {
            return Err(SignalError::Domain("path delay"));
        }
        if self.paths.windows(2).any(|w| w[0].delay > w[1].delay) {
            return Err(SignalError::Domain("path delays must be sorted"));
        }
        Ok(())
    }

    /// Per-sample complex noise standard deviation for a given signal power.
    pub fn noise_sigma(&self, signal_power: f64) -> f64 {
        match self.snr_db {
            Some(snr) => libm::sqrt(signal_power / libm::pow(10.0, snr / 10.0)),
            None => 0.0,
        }
    }
}
