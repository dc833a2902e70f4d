//! Angle images: stacked per-beacon spectra padded into a square.

use alloc::vec;
use alloc::vec::Vec;

use super::{SignalError, AZIMUTH_BINS};

pub const IMAGE_SIDE: usize = 28;

#[derive(Clone, Debug, PartialEq)]
pub struct AngleImage {
    /// One normalized 181-bin spectrum per beacon.
    pub spectra: Vec<Vec<f64>>,
    /// Row-major `IMAGE_SIDE x IMAGE_SIDE`.
    pub padded: Vec<f64>,
}

impl AngleImage {
    pub fn payload_len(&self) -> usize {
        self.spectra.len() * AZIMUTH_BINS
    }

    /// Entries added by padding, not the count of zero values.
    pub fn pad_len(&self) -> usize {
        self.padded.len() - self.payload_len()
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.padded[row * IMAGE_SIDE + col]
    }

    /// Recovers the stacked spectra from the padded image.
    pub fn unpad(&self) -> Vec<Vec<f64>> {
        self.padded[..self.payload_len()].chunks(AZIMUTH_BINS).map(<[f64]>::to_vec).collect()
    }
}

/// Scales a spectrum to peak at 1. An all-zero input stays zero.
pub fn normalize_spectrum(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; values.len()]
    }
}

pub fn build_angle_image(spectra: &[Vec<f64>], n_beacons: usize) -> Result<AngleImage, SignalError> {
    if spectra.len() != n_beacons {
        return Err(SignalError::Shape { expected: n_beacons, found: spectra.len() });
    }
    if n_beacons * AZIMUTH_BINS > IMAGE_SIDE * IMAGE_SIDE {
        return Err(SignalError::Domain("beacon count (image holds at most 4 spectra)"));
    }
    for (i, row) in spectra.iter().enumerate() {
        if row.len() != AZIMUTH_BINS {
            return Err(SignalError::Shape { expected: AZIMUTH_BINS, found: row.len() });
        }
        if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(SignalError::NotNormalized(i));
        }
    }
    let mut padded: Vec<f64> = spectra.iter().flatten().copied().collect();
    padded.resize(IMAGE_SIDE * IMAGE_SIDE, 0.0);
    Ok(AngleImage { spectra: spectra.to_vec(), padded })
}
