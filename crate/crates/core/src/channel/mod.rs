//! Forward channel synthesis: specular paths with Doppler, dense multipath
//! with Kronecker-structured covariance, and per-entry snapshot realization.

mod dense;
mod realize;
mod scene;
mod specular;

pub use dense::{
    angular_covariance, dense_angle_grid, dense_covariance, freq_psd, psd_delay_profile, toeplitz_hermitian,
    von_mises_weights, DenseCovariance,
};
pub use realize::{realize_snapshot, Realizer};
pub use scene::{
    tone_offsets, AngularProfile, ChannelScene, DelayProfile, DenseProfile, Motion, PathRecord, SceneFile, SpecularPath,
    ToneSpec, Waypoint, SCENE_SCHEMA_VERSION,
};
pub use specular::{delay_phasors, doppler_phasor, path_coupling, specular_response};

pub(crate) use specular::bilinear;
