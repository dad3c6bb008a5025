//! Numerical spectral-stability engine for soliton solutions of the
//! fourth-order nonlinear Schrodinger equation, based on the Maslov index:
//! conjugate-point counts, higher-order crossing forms, Morse indices of the
//! linearized operators, the corner correction, and the resulting eigenvalue
//! lower bound with Jones-Grillakis and Vakhitov-Kolokolov verdicts.

pub mod bundles;
pub mod error;
pub mod forms;
mod integrate;
mod interp;
pub mod maslovbox;
pub mod profiles;
pub mod solves;
pub mod symplectic;
pub mod systems;

pub use error::{CoreError, Result};
pub use integrate::{FramePath, OdeOpts};
pub use profiles::{
    kh_profile, linspace, load_sampled_profile, residual_norm, Parameters, ProfileSource,
    WaveProfile,
};
pub use symplectic::{intersection_dimension, omega, LagrangianFrame};
pub use systems::{
    asymptotic_data, essential_spectrum, spatial_eigenvalues, stable_frame_block,
    unstable_frame_block, AsymptoticData, EssentialSpectrum, LinearSystem, SystemKind,
};
