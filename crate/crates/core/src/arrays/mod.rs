//! Array geometry, element patterns, EADF compression and manifold evaluation.

mod calibration;
mod eadf;
mod geometry;
mod link;
mod pattern;

pub use calibration::{read_calibration_dir, write_calibration_dir, CalibrationHeader, CALIBRATION_SCHEMA_VERSION};
pub use eadf::{compute_eadf, grid_checksum, manifold, Eadf, ElementResponse, ResponseWithGradient, Truncation};
pub use geometry::{direction, ArrayGeometry, Layout, SPEED_OF_LIGHT};
pub use link::LinkManifolds;
pub use pattern::{synth_array, synth_pattern, ElementModel, ElevationExtension, GridSpec, PatternGrid};
