//! Averaged three-phase PWM rectifier model with backstepping and adaptive
//! backstepping direct power control.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: plant parameters, derived coefficients and the averaged dynamics.
//! - [`frames`]: abc/d-q transforms, instantaneous power, duty-cycle recovery.
//! - [`controllers`]: voltage, reactive-power and adaptive voltage control laws.
//! - [`scenario`] and [`sim`]: profiles and the fixed-step Euler closed loop.
//! - [`metrics`] and [`compare`]: step metrics, Lyapunov checks, comparisons.
//! - [`config`] and [`trace_csv`]: file formats used by the command-line tool.

pub mod compare;
pub mod config;
pub mod controllers;
pub mod frames;
pub mod metrics;
pub mod model;
pub mod scenario;
pub mod sim;
pub mod trace_csv;

pub use config::ConfigFile;
pub use controllers::ControllerGains;
pub use model::{PlantState, RectifierParams};
pub use sim::{run_simulation, ControllerKind, SimConfig, SimError, SimRun, Trace, TraceRecord};
