//! Localization accuracy versus SNR.

use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tbict_core::signal::{localize_user, AngleImage, LocalizationSetup, SignalError};
use tbict_core::simulation::Venue;

use crate::error::{Error, Result};
use crate::io::ImageEntry;
use crate::spec::ExperimentSpec;

const POSITION_STREAM: u64 = 11;
const NOISE_STREAM_BASE: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocSummaryRow {
    /// `None` for the noiseless row.
    pub snr_db: Option<f64>,
    pub trials: usize,
    /// Trials whose bearings gave no usable fix.
    pub dropped: usize,
    pub mean_abs_azimuth_error_deg: f64,
    pub max_abs_azimuth_error_deg: f64,
    pub position_rmse_m: f64,
    /// Trials whose sample covariance was Hermitian PSD.
    pub psd_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocTrialRow {
    pub snr_db: Option<f64>,
    pub trial: usize,
    pub true_x: f64,
    pub true_y: f64,
    pub est_x: Option<f64>,
    pub est_y: Option<f64>,
    pub position_error_m: Option<f64>,
    pub mean_abs_azimuth_error_deg: f64,
    pub covariance_psd: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocOutput {
    pub summary: Vec<LocSummaryRow>,
    pub trials: Vec<LocTrialRow>,
    pub images: Vec<(ImageEntry, AngleImage)>,
}

/// Monte Carlo over user positions for each configured SNR, plus a
/// noiseless row if enabled. Every row uses the same user positions.
pub fn run_localization_eval(spec: &ExperimentSpec) -> Result<LocOutput> {
    let cfg = &spec.localization;
    if cfg.trials < 30 {
        return Err(Error::Config(format!("localization needs at least 30 trials, got {}", cfg.trials)));
    }
    let venue = Venue::default();
    let mut pos_rng = ChaCha8Rng::seed_from_u64(spec.sim.seed);
    pos_rng.set_stream(POSITION_STREAM);
    let positions: Vec<[f64; 2]> = (0..cfg.trials).map(|_| venue.random_point(&mut pos_rng)).collect();

    let mut snrs: Vec<Option<f64>> = cfg.snr_db.iter().copied().map(Some).collect();
    if cfg.noiseless {
        snrs.push(None);
    }
    let rows: Vec<Result<RowResult>> = thread::scope(|s| {
        let handles: Vec<_> = snrs
            .iter()
            .enumerate()
            .map(|(k, &snr)| {
                let setup = LocalizationSetup { snr_db: snr, ..cfg.setup };
                let (venue, positions) = (&venue, &positions);
                let seed = spec.sim.seed;
                s.spawn(move || evaluate_row(venue, positions, &setup, seed, NOISE_STREAM_BASE + k as u64))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("localization worker panicked")).collect()
    });

    let mut out = LocOutput::default();
    for (snr, row) in snrs.into_iter().zip(rows) {
        let row = row?;
        out.summary.push(row.summary(snr));
        for (trial, t) in row.trials.into_iter().enumerate() {
            let est = t.estimate.ok();
            out.trials.push(LocTrialRow {
                snr_db: snr,
                trial,
                true_x: t.true_xy[0],
                true_y: t.true_xy[1],
                est_x: est.map(|e| e[0]),
                est_y: est.map(|e| e[1]),
                position_error_m: est.map(|e| (e[0] - t.true_xy[0]).hypot(e[1] - t.true_xy[1])),
                mean_abs_azimuth_error_deg: t.mean_azimuth_error,
                covariance_psd: t.psd,
            });
            if cfg.export_images {
                let entry = ImageEntry {
                    snr_db: snr,
                    channel_kind: cfg.setup.channel,
                    trial,
                    beacon_ids: t.beacon_ids,
                    true_xy: t.true_xy,
                };
                out.images.push((entry, t.image));
            }
        }
    }
    Ok(out)
}

struct TrialResult {
    true_xy: [f64; 2],
    beacon_ids: Vec<u32>,
    estimate: std::result::Result<[f64; 2], SignalError>,
    azimuth_errors: Vec<f64>,
    mean_azimuth_error: f64,
    psd: bool,
    image: AngleImage,
}

struct RowResult {
    trials: Vec<TrialResult>,
}

impl RowResult {
    fn summary(&self, snr_db: Option<f64>) -> LocSummaryRow {
        let errors: Vec<f64> = self.trials.iter().flat_map(|t| t.azimuth_errors.iter().copied()).collect();
        let fixes: Vec<f64> = self
            .trials
            .iter()
            .filter_map(|t| t.estimate.as_ref().ok().map(|e| (e[0] - t.true_xy[0]).hypot(e[1] - t.true_xy[1])))
            .collect();
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let squares: Vec<f64> = fixes.iter().map(|e| e * e).collect();
        LocSummaryRow {
            snr_db,
            trials: self.trials.len(),
            dropped: self.trials.len() - fixes.len(),
            mean_abs_azimuth_error_deg: mean(&errors),
            max_abs_azimuth_error_deg: errors.iter().copied().fold(0.0, f64::max),
            position_rmse_m: mean(&squares).sqrt(),
            psd_trials: self.trials.iter().filter(|t| t.psd).count(),
        }
    }
}

fn evaluate_row(
    venue: &Venue,
    positions: &[[f64; 2]],
    setup: &LocalizationSetup,
    seed: u64,
    stream: u64,
) -> Result<RowResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut trials = Vec::with_capacity(positions.len());
    for &xy in positions {
        let t = localize_user(&venue.beacons, xy, setup, &mut rng)
            .map_err(|e| Error::Config(format!("localization at {xy:?}: {e}")))?;
        let azimuth_errors: Vec<f64> = t.azimuth_errors().collect();
        let mean_azimuth_error = azimuth_errors.iter().sum::<f64>() / azimuth_errors.len().max(1) as f64;
        trials.push(TrialResult {
            true_xy: xy,
            beacon_ids: t.beacon_ids,
            estimate: t.estimate.map(|e| e.xy),
            azimuth_errors,
            mean_azimuth_error,
            psd: t.covariance_psd,
            image: t.image,
        });
    }
    Ok(RowResult { trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::LocEvalConfig;

    fn spec(trials: usize) -> ExperimentSpec {
        ExperimentSpec {
            localization: LocEvalConfig { snr_db: vec![10.0, 20.0], trials, ..LocEvalConfig::default() },
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn too_few_trials_is_a_precondition_error() {
        assert_eq!(run_localization_eval(&spec(0)).unwrap_err().exit_code(), 3);
        assert_eq!(run_localization_eval(&spec(29)).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn rows_and_images() {
        let out = run_localization_eval(&spec(30)).unwrap();
        assert_eq!(out.summary.len(), 3);
        assert_eq!(out.summary[2].snr_db, None);
        assert_eq!(out.trials.len(), 90);
        assert_eq!(out.images.len(), 90);
        assert!(out.summary.iter().all(|r| r.psd_trials == 30));
        assert!(out.summary[2].max_abs_azimuth_error_deg <= 1.0, "{:?}", out.summary[2]);
        assert!(out.summary[2].position_rmse_m < 0.5, "{:?}", out.summary[2]);
        assert_eq!(out.summary, run_localization_eval(&spec(30)).unwrap().summary);
    }
}
