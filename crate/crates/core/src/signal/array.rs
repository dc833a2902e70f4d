//! Antenna-array response and snapshot synthesis.
//!
//! Element `e` sits on axis `e % 3` (x, y, z) at distance `(e / 3 + 1) * d`
//! from the reference point, so a 3-element array has exactly the
//! three-exponent array vector
//! `exp(-j 2 pi d / lambda [cos(t)cos(p), sin(t)cos(p), sin(p)])`.
//! Larger arrays extend each axis outwards.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BlePulseConfig, ChannelRealization, SignalError};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Array response for a plane wave from `azimuth_deg`, `elevation_deg`.
pub fn steering_vector(
    n_elements: usize,
    spacing: f64,
    wavelength: f64,
    azimuth_deg: f64,
    elevation_deg: f64,
) -> Vec<Complex64> {
    let (st, ct) = libm::sincos(azimuth_deg.to_radians());
    let (sp, cp) = libm::sincos(elevation_deg.to_radians());
    let dir = [ct * cp, st * cp, sp];
    let k = -2.0 * PI / wavelength;
    (0..n_elements)
        .map(|e| {
            let pos = (e / 3 + 1) as f64 * spacing;
            Complex64::from_polar(1.0, k * pos * dir[e % 3])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSpec {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArraySnapshot {
    pub n_elements: usize,
    pub n_samples: usize,
    pub spacing: f64,
    pub wavelength: f64,
    /// Row-major `n_elements x n_samples`.
    pub samples: Vec<Complex64>,
    pub true_azimuth: f64,
    pub true_elevation: f64,
    pub noise_sigma: f64,
    /// Mean noiseless power per element sample.
    pub signal_power: f64,
}

impl ArraySnapshot {
    pub fn sample(&self, element: usize, m: usize) -> Complex64 {
        self.samples[element * self.n_samples + m]
    }

    pub fn column(&self, m: usize) -> Vec<Complex64> {
        (0..self.n_elements).map(|e| self.sample(e, m)).collect()
    }

    pub fn steering(&self, azimuth_deg: f64, elevation_deg: f64) -> Vec<Complex64> {
        steering_vector(self.n_elements, self.spacing, self.wavelength, azimuth_deg, elevation_deg)
    }
}

/// Received samples for one GFSK source through `channel`.
pub fn synthesize_snapshot<R: Rng + ?Sized>(
    config: &BlePulseConfig,
    channel: &ChannelRealization,
    azimuth_deg: f64,
    elevation_deg: f64,
    n_elements: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<ArraySnapshot, SignalError> {
    let source = SourceSpec { azimuth_deg, elevation_deg };
    synthesize_sources(config, channel, &[source], n_elements, n_samples, rng)
}

/// Received samples for independent GFSK sources sharing one channel
/// profile. Each source gets its own symbols and initial phase. The SNR is
/// taken relative to the total noiseless power per element.
pub fn synthesize_sources<R: Rng + ?Sized>(
    config: &BlePulseConfig,
    channel: &ChannelRealization,
    sources: &[SourceSpec],
    n_elements: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<ArraySnapshot, SignalError> {
    config.validate()?;
    channel.validate()?;
    if sources.is_empty() {
        return Err(SignalError::Domain("source count"));
    }
    for s in sources {
        if !(0.0..=180.0).contains(&s.azimuth_deg) {
            return Err(SignalError::Domain("azimuth (0..=180 degrees)"));
        }
        if !(-90.0..=90.0).contains(&s.elevation_deg) {
            return Err(SignalError::Domain("elevation (-90..=90 degrees)"));
        }
    }
    if n_elements < 2 {
        return Err(SignalError::Domain("element count (at least 2)"));
    }
    if n_samples < n_elements {
        return Err(SignalError::Domain("sample count (at least the element count)"));
    }

    let wavelength = config.wavelength();
    let spacing = wavelength / 2.0;
    let ts = config.sample_period();
    let n_symbols = n_samples / config.oversampling + 8;

    let mut clean = vec![Complex64::new(0.0, 0.0); n_elements * n_samples];
    for src in sources {
        let symbols = BlePulseConfig::random_symbols(n_symbols, rng);
        let phase0 = rng.gen_range(0.0..2.0 * PI);
        let pulse = BlePulseConfig { initial_phase: config.initial_phase + phase0, ..*config };
        let baseband = pulse.baseband(&symbols, n_samples);
        let mut received = vec![Complex64::new(0.0, 0.0); n_samples];
        for path in &channel.paths {
            let gain = path.gain * Complex64::from_polar(1.0, -2.0 * PI * config.carrier_hz * path.delay);
            let lag = libm::round(path.delay / ts) as usize;
            for m in lag..n_samples {
                received[m] += gain * baseband[m - lag];
            }
        }
        let steer = steering_vector(n_elements, spacing, wavelength, src.azimuth_deg, src.elevation_deg);
        for (e, a) in steer.iter().enumerate() {
            let row = &mut clean[e * n_samples..(e + 1) * n_samples];
            for (out, s) in row.iter_mut().zip(&received) {
                *out += a * s;
            }
        }
    }

    let signal_power = clean.iter().map(|v| v.norm_sqr()).sum::<f64>() / clean.len() as f64;
    let noise_sigma = channel.noise_sigma(signal_power);
    let per_axis = noise_sigma / core::f64::consts::SQRT_2;
    let mut samples = clean;
    for v in &mut samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re * per_axis, im * per_axis);
    }

    Ok(ArraySnapshot {
        n_elements,
        n_samples,
        spacing,
        wavelength,
        samples,
        true_azimuth: sources[0].azimuth_deg,
        true_elevation: sources[0].elevation_deg,
        noise_sigma,
        signal_power,
    })
}
