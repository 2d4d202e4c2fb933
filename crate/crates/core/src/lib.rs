//! End-to-end simulation and estimation toolkit for a Rydberg atomic
//! quantum uniform linear array (RAQ-ULA).
//!
//! The pipeline runs from the four-level atomic susceptibility (Lindblad
//! steady state), through the balanced-coherent-detection front end, to
//! photodetected baseband snapshots, and estimates multi-target directions
//! of arrival with the mismatch-corrected RAQ-ESPRIT, a deterministic-signal
//! ML search, the asymptotic ML error, and the Cramer-Rao bound, in the
//! photon-shot-limit and standard-quantum-limit noise regimes next to a
//! classical antenna-array baseline.
//!
//! Modules, bottom-up:
//!
//! - [`numkernel`]: dense complex linear algebra (SVD, eigen, pinv,
//!   constrained null-space solve).
//! - [`atomphys`]: Lindblad steady state, susceptibility chi and chi',
//!   Lambert-Beer probe transformation.
//! - [`transducer`]: sensor gain/phase, PSL/SQL noise coefficients.
//! - [`arraymodel`]: ULA geometry, steering/mismatch matrices, snapshot
//!   synthesis, classical baseline.
//! - [`estimators`]: RAQ-ESPRIT, classical ESPRIT, ML, Eq.-21 error, CRLB.
//! - [`harness`]: Monte Carlo sweeps, assignment-matched MSE, CSV tables.
//! - [`config`]: TOML configuration with unit-suffixed keys, run manifests.

pub mod arraymodel;
pub mod atomphys;
pub mod config;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numkernel;
pub mod transducer;

pub use error::{Error, Result};
