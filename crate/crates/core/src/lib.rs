//! Stochastic and deterministic analysis of one-step interaction schemes.
//!
//! A scheme is a set of species and reactions with polynomial rate laws. From
//! it the crate derives the drift, diffusion and Jacobian of the population
//! dynamics, integrates deterministic (RK4), diffusion (Euler–Maruyama) and
//! exact (Gillespie) trajectories, and locates and classifies fixed points.
//!
//! ```
//! use onestep::models::{fasttrack, FastTrackParams};
//! use onestep::kinetics;
//!
//! let scheme = fasttrack(&FastTrackParams::new(1.0, 0.1, 0.5)).unwrap();
//! let a = kinetics::drift(&scheme, &[5.0, 2.0]);
//! assert!(a.iter().all(|v| v.abs() < 1e-12));
//! ```

pub mod analysis;
pub mod eigen;
pub mod formats;
pub mod kinetics;
pub mod models;
pub mod scheme;
pub mod simulate;

pub use analysis::{Classification, FixedPoint, StabilityReport};
pub use kinetics::KineticCoefficients;
pub use models::{BuiltinModel, ChunkModelParams, FastTrackParams, InterestPolicy, ModelError};
pub use scheme::{InteractionScheme, Scheme, SchemeError};
pub use simulate::{EnsembleMode, EnsembleStats, RunConfig, SimError, Trajectory, TrajectoryKind};
