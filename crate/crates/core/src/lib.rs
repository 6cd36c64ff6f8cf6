//! Simulation and verification toolkit for kinetic and macroscopic models of
//! stripe formation in engineered bacterial colonies.
//!
//! The kinetic model evolves the cell density `rho(t, x, z)` structured by the
//! intracellular CheZ level `z`, coupled to the AHL signal `h(t, x)` and the
//! nutrient `n(t, x)`. Its fast-response limit is a reaction-diffusion system
//! whose cell motility `D~(h)` depends on the local AHL level.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod jet;
pub mod kinetic;
pub mod macroscopic;
pub mod model;
pub mod spectral;
pub mod stability;

pub use diagnostics::{DiagnosticsRecord, DiagnosticsSpec, Energies, FieldSel};
pub use error::{Error, Result};
pub use grid::{KineticField, PeriodicGrid, ScalarField, Snapshot};
pub use kinetic::{KineticState, KineticSolver, StepControl, Trajectory};
pub use macroscopic::{MacroModel, MacroSolver, MacroState};
pub use model::{HypothesisConstants, ModelParams, MotilityProfile};
