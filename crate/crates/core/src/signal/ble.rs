//! GFSK baseband of a BLE advertiser.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlePulseConfig {
    /// Symbol energy, joules.
    pub symbol_energy: f64,
    /// Symbol period, seconds.
    pub symbol_period: f64,
    pub modulation_index: f64,
    pub initial_phase: f64,
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Bandwidth-time product of the Gaussian filter.
    pub bt: f64,
    /// Samples per symbol.
    pub oversampling: usize,
}

impl Default for BlePulseConfig {
    fn default() -> Self {
        BlePulseConfig {
            symbol_energy: 1.0,
            symbol_period: 1.0e-6,
            modulation_index: 0.5,
            initial_phase: 0.0,
            carrier_hz: 2.44e9,
            bt: 0.5,
            oversampling: 8,
        }
    }
}

impl BlePulseConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(0.45..=0.55).contains(&self.modulation_index) {
            return Err(SignalError::Domain("modulation index (BLE allows 0.45..=0.55)"));
        }
        if !(2.4e9..=2.48e9).contains(&self.carrier_hz) {
            return Err(SignalError::Domain("carrier frequency (2.4..=2.48 GHz)"));
        }
        if !(self.symbol_period > 0.0) || !(self.symbol_energy > 0.0) || !(self.bt > 0.0) || self.oversampling == 0 {
            return Err(SignalError::Domain("pulse parameters"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        super::SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn sample_period(&self) -> f64 {
        self.symbol_period / self.oversampling as f64
    }

    /// `sqrt(2E/T)`, the constant envelope of the baseband signal.
    pub fn amplitude(&self) -> f64 {
        libm::sqrt(2.0 * self.symbol_energy / self.symbol_period)
    }

    /// Gaussian-filtered rectangular frequency pulse `p(t)`; it integrates
    /// to one symbol period.
    pub fn pulse(&self, t: f64) -> f64 {
        let period = self.symbol_period;
        let bandwidth = self.bt / period;
        let sigma = libm::sqrt(LN_2) / (2.0 * PI * bandwidth);
        let k = 1.0 / (sigma * core::f64::consts::SQRT_2);
        0.5 * (libm::erf(k * (t + period / 2.0)) - libm::erf(k * (t - period / 2.0)))
    }

    /// Random ±1 symbols.
    pub fn random_symbols<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
    }

    /// Complex baseband `sqrt(2E/T) exp(j(phi(t) + phi_0))` sampled at
    /// `oversampling` samples per symbol, `n_samples` long.
    ///
    /// The phase deviation integrates the filtered symbol train with a
    /// rectangle rule, so each isolated symbol advances the phase by
    /// `pi * h * s[n]`.
    pub fn baseband(&self, symbols: &[f64], n_samples: usize) -> Vec<Complex64> {
        let ts = self.sample_period();
        let period = self.symbol_period;
        let span = 3; // pulse tails beyond three symbols are negligible
        let scale = PI * self.modulation_index / period * ts;
        let amp = self.amplitude();
        let mut phase = 0.0;
        let mut out = Vec::with_capacity(n_samples);
        for m in 0..n_samples {
            let t = m as f64 * ts;
            let centre = libm::floor(t / period) as i64;
            let mut freq = 0.0;
            for n in (centre - span).max(0)..=(centre + span) {
                if let Some(&s) = symbols.get(n as usize) {
                    freq += s * self.pulse(t - (n as f64 + 0.5) * period);
                }
            }
            phase += scale * freq;
            out.push(Complex64::from_polar(amp, phase + self.initial_phase));
        }
        out
    }
}
