//! Linear and nonlinear dynamics of two coupled parametric oscillators:
//! spectra, exceptional points, Floquet analysis and output squeezing.

pub mod dynamics;
pub mod ep;
pub mod floquet;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod seeds;
pub mod spectral;
pub mod squeezing;

pub use linalg::{CMatrix4, RMatrix4, C64};
pub use model::{DriveSchedule, FieldState, LoopDirection, ModelError, SweepVariable, SystemParams};
