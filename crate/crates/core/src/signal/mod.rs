//! BLE angle-of-arrival localization.
//!
//! The pipeline is: synthesize array samples for a GFSK source seen through
//! a multipath channel ([`synthesize_snapshot`]), estimate the spatial
//! covariance and its noise subspace, scan the MUSIC pseudo-spectrum over
//! integer azimuths 0..=180 ([`music_spectrum`]), stack per-beacon spectra
//! into a 28x28 angle image ([`build_angle_image`]) and intersect the
//! per-beacon bearings by least squares ([`estimate_position`]).

mod array;
mod ble;
mod channel;
mod eigen;
mod image;
mod locate;
mod music;

pub use array::{steering_vector, synthesize_snapshot, synthesize_sources, ArraySnapshot, SourceSpec, SPEED_OF_LIGHT};
pub use ble::BlePulseConfig;
pub use channel::{ChannelKind, ChannelRealization, Path};
pub use eigen::{hermitian_eigen, HermitianEigen};
pub use image::{build_angle_image, normalize_spectrum, AngleImage, IMAGE_SIDE};
pub use locate::{
    bearing_deg, estimate_position, localize_user, visible_beacons, Beacon, LocalizationSetup, LocalizationTrial,
    PositionEstimate, ENDFIRE_MARGIN_DEG, MAX_CONDITION,
};
pub use music::{music_spectrum, Covariance, MusicSpectrum, AZIMUTH_BINS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("{0} out of range")]
    Domain(&'static str),
    #[error("covariance is rank-deficient for {n_sources} sources ({detail})")]
    NumericalRank { n_sources: usize, detail: &'static str },
    #[error("expected {expected} values per row, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("spectrum row {0} is not normalized to [0, 1]")]
    NotNormalized(usize),
    #[error("bearing lines are parallel or nearly so (condition number {0:.3e})")]
    DegenerateGeometry(f64),
    #[error("need at least two bearings, got {0}")]
    TooFewBearings(usize),
}
