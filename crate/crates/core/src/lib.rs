//! Constructive tools for controllability of two coupled parabolic equations
//! with first-order coupling: symbolic operator algebra and commutator
//! elimination, coordinate normalization of the coupling term, finite
//! difference simulation with penalized HUM controls, and spectral
//! non-controllability witnesses.

pub mod symbolic;
pub mod linalg;
pub mod normalize;
pub mod simulate;
pub mod solvability;
pub mod spectral;
pub mod system;
