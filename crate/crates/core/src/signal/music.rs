//! Sample covariance and the MUSIC pseudo-spectrum.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{hermitian_eigen, ArraySnapshot, SignalError};

/// Integer azimuths 0..=180.
pub const AZIMUTH_BINS: usize = 181;

const RANK_TOLERANCE: f64 = 1e-12;

/// Sample covariance `(1/M) sum r r^H`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariance {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl Covariance {
    pub fn from_snapshot(s: &ArraySnapshot) -> Self {
        let n = s.n_elements;
        let m = s.n_samples;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let ri = &s.samples[i * m..(i + 1) * m];
            for j in i..n {
                let rj = &s.samples[j * m..(j + 1) * m];
                let acc: Complex64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum::<Complex64>() / m as f64;
                data[i * n + j] = acc;
                data[j * n + i] = acc.conj();
            }
        }
        Covariance { n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Hermitian symmetry and non-negative spectrum, up to a tolerance
    /// relative to the trace.
    pub fn is_hermitian_psd(&self) -> bool {
        let n = self.n;
        let trace: f64 = (0..n).map(|i| self.get(i, i).re).sum();
        let tol = 1e-9 * trace.abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        hermitian_eigen(n, &self.data).values.iter().all(|&v| v >= -tol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MusicSpectrum {
    /// `values[k]` is the pseudo-spectrum at azimuth `k` degrees.
    pub values: Vec<f64>,
}

impl MusicSpectrum {
    /// Azimuth of the global maximum; ties go to the smaller angle.
    pub fn peak_deg(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }

    /// Strict interior local maxima and boundary bins that beat their single
    /// neighbour, sorted by descending height.
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        let last = v.len() - 1;
        let mut peaks: Vec<usize> = (0..v.len())
            .filter(|&k| {
                let left = k == 0 || v[k] > v[k - 1];
                let right = k == last || v[k] >= v[k + 1];
                left && right
            })
            .collect();
        peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
        peaks
    }
}

/// MUSIC spectrum over integer azimuths with the elevation fixed at zero.
pub fn music_spectrum(snapshot: &ArraySnapshot, n_sources: usize) -> Result<MusicSpectrum, SignalError> {
    let cov = Covariance::from_snapshot(snapshot);
    spectrum_from_covariance(&cov, snapshot, n_sources)
}

pub(crate) fn spectrum_from_covariance(
    cov: &Covariance,
    snapshot: &ArraySnapshot,
    n_sources: usize,
) -> Result<MusicSpectrum, SignalError> {
    let n = snapshot.n_elements;
    if n_sources == 0 || n_sources >= n {
        return Err(SignalError::Domain("source count (1..n_elements)"));
    }
    if snapshot.n_samples < n {
        return Err(SignalError::NumericalRank { n_sources, detail: "fewer samples than elements" });
    }
    let eig = hermitian_eigen(n, &cov.data);
    let lambda_max = eig.values[n - 1];
    if !(lambda_max > 0.0) || eig.values[n - n_sources] <= RANK_TOLERANCE * lambda_max {
        return Err(SignalError::NumericalRank { n_sources, detail: "signal eigenvalues vanish" });
    }
    let noise = &eig.vectors[..n - n_sources];
    let floor = 1e-15 * n as f64;
    let values = (0..AZIMUTH_BINS)
        .map(|az| {
            let theta = snapshot.steering(az as f64, 0.0);
            let denom: f64 = noise
                .iter()
                .map(|e| e.iter().zip(&theta).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr())
                .sum();
            1.0 / denom.max(floor)
        })
        .collect();
    Ok(MusicSpectrum { values })
}
