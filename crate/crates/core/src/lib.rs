//! Phase retrieval by smooth amplitude flow.
//!
//! Recovers x ∈ ℝⁿ or ℂⁿ (up to a global phase) from amplitudes bᵢ = |⟨aᵢ, x⟩|
//! by gradient descent on a smoothed amplitude loss, started from a weighted
//! maximal-correlation spectral estimate. Amplitude-flow and Wirtinger-flow
//! losses are available as baselines, and measurements can come from dense
//! Gaussian matrices or coded diffraction patterns.
//!
//! ```no_run
//! use saf_core::prelude::*;
//!
//! let seed = RngSeed::new(7, 0);
//! let mut rng = seed.rng();
//! let x = sample_gaussian_vector(100, Field::Real, &mut rng)?;
//! let model = build_gaussian_model(300, 100, Field::Real, &mut rng)?;
//! let obs = observe(&model, &x, Noise::None, &mut rng)?;
//! let z0 = initialize(&model, &obs, &InitConfig::with_seed(seed.derive(1)))?;
//! let cfg = SolverConfig::new(ObjectiveKind::default(), Field::Real);
//! let (z, trace) = solver::run(&model, &obs, &cfg, &z0, None)?;
//! println!("{} after {} steps, NMSE {:e}", trace.status, trace.iterations(), nmse(&z, &x)?);
//! # Ok::<(), saf_core::Error>(())
//! ```

pub mod error;
pub mod harness;
pub mod init;
pub mod measurement;
pub mod numerics;
pub mod objective;
pub mod solver;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::init::{estimate_norm, initialize, InitConfig};
    pub use crate::measurement::{
        build_cdp_model, build_gaussian_model, observe, DftShape, MeasurementModel, Noise,
        Observation,
    };
    pub use crate::numerics::{
        dist_up_to_phase, nmse, sample_gaussian_vector, Field, RngSeed, SignalVector,
    };
    pub use crate::objective::{ObjectiveKind, SafParams};
    pub use crate::solver::{self, SolverConfig, SolverStatus, StepMode};
}
