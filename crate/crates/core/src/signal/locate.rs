//! Bearing-only position estimation from per-beacon spectrum peaks.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::music::spectrum_from_covariance;
use super::{
    build_angle_image, normalize_spectrum, synthesize_snapshot, AngleImage, BlePulseConfig, ChannelKind,
    ChannelRealization, Covariance, SignalError,
};

/// Largest accepted condition number of the bearing normal equations.
pub const MAX_CONDITION: f64 = 1e6;

/// Bearings this close to the array axis are not used: 0 and 180 degrees
/// produce identical array vectors and the spectrum is flat nearby.
pub const ENDFIRE_MARGIN_DEG: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub id: u32,
    pub position: [f64; 2],
    /// Global direction of local azimuth 0, degrees. The array covers local
    /// azimuths 0..=180, the half-plane to the left of this direction.
    pub facing_deg: f64,
}

impl Beacon {
    /// Local azimuth of `point` in (-180, 180].
    pub fn local_azimuth(&self, point: [f64; 2]) -> f64 {
        wrap_180(bearing_deg(self.position, point) - self.facing_deg)
    }

    /// Whether `point` lies in the usable field of view.
    pub fn sees(&self, point: [f64; 2]) -> bool {
        (ENDFIRE_MARGIN_DEG..=180.0 - ENDFIRE_MARGIN_DEG).contains(&self.local_azimuth(point))
    }

    pub fn distance(&self, point: [f64; 2]) -> f64 {
        libm::hypot(point[0] - self.position[0], point[1] - self.position[1])
    }
}

fn wrap_180(deg: f64) -> f64 {
    let mut d = deg % 360.0;
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Global bearing from `from` to `to`, degrees in [0, 360).
pub fn bearing_deg(from: [f64; 2], to: [f64; 2]) -> f64 {
    let deg = libm::atan2(to[1] - from[1], to[0] - from[0]).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}

/// The `k` nearest beacons whose field of view contains `point`, nearest
/// first; ties break by id.
pub fn visible_beacons(beacons: &[Beacon], point: [f64; 2], k: usize) -> Vec<Beacon> {
    let mut seen: Vec<Beacon> = beacons.iter().copied().filter(|b| b.sees(point)).collect();
    seen.sort_by(|a, b| a.distance(point).total_cmp(&b.distance(point)).then(a.id.cmp(&b.id)));
    seen.truncate(k);
    seen
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub xy: [f64; 2],
    /// Root sum of squared perpendicular distances to the bearing lines.
    pub residual: f64,
    pub condition: f64,
}

/// Least-squares intersection of bearing lines. Each line passes through a
/// beacon with global direction `azimuths_deg[i]`.
pub fn estimate_position(positions: &[[f64; 2]], azimuths_deg: &[f64]) -> Result<PositionEstimate, SignalError> {
    if positions.len() != azimuths_deg.len() {
        return Err(SignalError::Shape { expected: positions.len(), found: azimuths_deg.len() });
    }
    if positions.len() < 2 {
        return Err(SignalError::TooFewBearings(positions.len()));
    }
    if azimuths_deg.iter().chain(positions.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(SignalError::Domain("bearing inputs must be finite"));
    }
    let normals: Vec<([f64; 2], f64)> = positions
        .iter()
        .zip(azimuths_deg)
        .map(|(p, a)| {
            let (s, c) = libm::sincos(a.to_radians());
            let n = [-s, c];
            (n, n[0] * p[0] + n[1] * p[1])
        })
        .collect();
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (n, rhs) in &normals {
        a11 += n[0] * n[0];
        a12 += n[0] * n[1];
        a22 += n[1] * n[1];
        b1 += n[0] * rhs;
        b2 += n[1] * rhs;
    }
    let mean = (a11 + a22) / 2.0;
    let spread = libm::hypot((a11 - a22) / 2.0, a12);
    let (lo, hi) = (mean - spread, mean + spread);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(SignalError::DegenerateGeometry(condition));
    }
    let det = a11 * a22 - a12 * a12;
    let xy = [(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det];
    let residual = libm::sqrt(
        normals
            .iter()
            .map(|(n, rhs)| {
                let r = n[0] * xy[0] + n[1] * xy[1] - rhs;
                r * r
            })
            .sum(),
    );
    Ok(PositionEstimate { xy, residual, condition })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizationSetup {
    pub pulse: BlePulseConfig,
    pub channel: ChannelKind,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub n_elements: usize,
    pub n_samples: usize,
    pub rms_delay_s: f64,
    /// Height of the user device above the beacon plane; non-zero values
    /// give the incident wave an elevation the azimuth scan ignores.
    pub height_offset_m: f64,
    pub beacons_per_fix: usize,
}

impl Default for LocalizationSetup {
    fn default() -> Self {
        LocalizationSetup {
            pulse: BlePulseConfig::default(),
            channel: ChannelKind::Awgn,
            snr_db: Some(20.0),
            n_elements: 4,
            n_samples: 256,
            rms_delay_s: 50e-9,
            height_offset_m: 0.0,
            beacons_per_fix: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationTrial {
    pub true_xy: [f64; 2],
    pub beacon_ids: Vec<u32>,
    /// Local azimuths, degrees.
    pub true_azimuths: Vec<f64>,
    pub estimated_azimuths: Vec<f64>,
    /// Whether every sample covariance in the trial was Hermitian PSD.
    pub covariance_psd: bool,
    pub image: AngleImage,
    pub estimate: Result<PositionEstimate, SignalError>,
}

impl LocalizationTrial {
    pub fn azimuth_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.true_azimuths.iter().zip(&self.estimated_azimuths).map(|(t, e)| (t - e).abs())
    }

    pub fn position_error(&self) -> Option<f64> {
        self.estimate.as_ref().ok().map(|e| libm::hypot(e.xy[0] - self.true_xy[0], e.xy[1] - self.true_xy[1]))
    }
}

/// Simulates one fix of a user at `user_xy`: a snapshot and MUSIC spectrum
/// per visible beacon, an angle image of the normalized spectra, and a
/// triangulated position from the spectrum peaks.
pub fn localize_user<R: Rng + ?Sized>(
    beacons: &[Beacon],
    user_xy: [f64; 2],
    setup: &LocalizationSetup,
    rng: &mut R,
) -> Result<LocalizationTrial, SignalError> {
    let chosen = visible_beacons(beacons, user_xy, setup.beacons_per_fix);
    if chosen.len() < 2 {
        return Err(SignalError::TooFewBearings(chosen.len()));
    }
    let mut trial = LocalizationTrial {
        true_xy: user_xy,
        beacon_ids: chosen.iter().map(|b| b.id).collect(),
        true_azimuths: Vec::with_capacity(chosen.len()),
        estimated_azimuths: Vec::with_capacity(chosen.len()),
        covariance_psd: true,
        image: AngleImage { spectra: Vec::new(), padded: Vec::new() },
        estimate: Err(SignalError::TooFewBearings(0)),
    };
    let mut spectra = Vec::with_capacity(chosen.len());
    let mut global = Vec::with_capacity(chosen.len());
    for b in &chosen {
        let azimuth = b.local_azimuth(user_xy).clamp(0.0, 180.0);
        let elevation = libm::atan2(setup.height_offset_m, b.distance(user_xy)).to_degrees();
        let channel = match setup.channel {
            ChannelKind::Awgn => ChannelRealization::awgn(setup.snr_db),
            ChannelKind::Rayleigh => ChannelRealization::rayleigh(rng, setup.snr_db, setup.rms_delay_s),
        };
        let snapshot =
            synthesize_snapshot(&setup.pulse, &channel, azimuth, elevation, setup.n_elements, setup.n_samples, rng)?;
        let cov = Covariance::from_snapshot(&snapshot);
        trial.covariance_psd &= cov.is_hermitian_psd();
        let spectrum = spectrum_from_covariance(&cov, &snapshot, 1)?;
        let peak = spectrum.peak_deg() as f64;
        trial.true_azimuths.push(azimuth);
        trial.estimated_azimuths.push(peak);
        global.push(b.facing_deg + peak);
        spectra.push(normalize_spectrum(&spectrum.values));
    }
    trial.image = build_angle_image(&spectra, spectra.len())?;
    let positions: Vec<[f64; 2]> = chosen.iter().map(|b| b.position).collect();
    trial.estimate = estimate_position(&positions, &global);
    Ok(trial)
}
