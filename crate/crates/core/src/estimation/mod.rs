//! Inverse problem: specular and dense multipath parameters from measured
//! impulse responses, Doppler ambiguity of switching schedules, tracking.

mod ambiguity;
mod dense;
mod model;
mod observation;
mod result;
mod specular;
mod tracking;

pub use ambiguity::{default_doppler_grid, doppler_ambiguity, doppler_search_limit, AmbiguityFunction};
pub use dense::{dense_profile_template, estimate_dense, residual_delay_profile, DenseFit};
pub use model::{Problem, Refinement};
pub use observation::Observation;
pub use result::{read_results_json, write_results_json, EstimationResult, PathEstimate, PathEstimateRecord, ResultFile};
pub use specular::{estimate_specular, EstimatorConfig, SpecularEstimator};
pub use tracking::{track_aoa, write_tracks_csv, TrackConfig, TrackEvent, TrackRecord, Tracks};
