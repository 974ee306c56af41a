//! Simulation and planning library for adaptive UAV field surveys.
//!
//! The library models a two-stage survey: a serpentine coverage flight at
//! high altitude finds candidate objects with a noisy detector, and a
//! follow-up inspection flight revisits uncertain candidates at low altitude
//! to confirm, relocate or discard them. Everything runs in a local planar
//! frame with synthetic fields, so whole parameter sweeps execute in seconds
//! and are reproducible bit-for-bit from a seed.
//!
//! Module overview:
//!
//! * [`geo`] - camera intrinsics, poses, image/ground transforms, footprints
//! * [`coverage`] - field polygons and serpentine coverage path planning
//! * [`detect`] - synthetic detector, detection sets, certainty measures
//! * [`mapping`] - accumulating detections into a deduplicated object map
//! * [`inspect`] - accept/reject/inspect decisions and inspection tours
//! * [`sim`] - world generation, localization error, mission execution
//! * [`eval`] - ground-truth matching, F1, relative length, experiments
//! * [`io`] - GeoJSON import/export for fields, worlds, maps and paths

pub mod coverage;
pub mod detect;
pub mod eval;
pub mod geo;
pub mod inspect;
pub mod io;
pub mod mapping;
pub mod rng;
pub mod sim;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A stochastic construction ran out of attempts before satisfying
    /// its constraints (e.g. minimum-distance rejection sampling).
    #[error("infeasible after {attempts} attempts: {context} (placed {achieved})")]
    Infeasible {
        context: String,
        attempts: usize,
        achieved: usize,
    },

    /// A statistic could not be computed from the given samples.
    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
