//! DC operating point and transient analysis over an elaborated
//! [`Circuit`](crate::netlist::Circuit).
//!
//! Nonlinear devices are solved by damped Newton iteration on the modified
//! nodal equations. Transient analysis integrates with the trapezoidal rule
//! (backward Euler on the first step after every discontinuity), controls
//! the step from a predictor/corrector truncation-error estimate, lands
//! exactly on source breakpoints and comparator edges, and locates
//! comparator input crossings by interpolation.

mod engine;
mod lu;
mod mna;
mod transient;
mod waveforms;

pub use engine::{dc_operating_point, DcStrategy, OperatingPoint};
pub use lu::solve_linear;
pub use mna::MnaSystem;
pub use transient::{operating_point_waveforms, transient};
pub use waveforms::{Event, EventKind, Waveforms};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Trapezoidal,
    BackwardEuler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub reltol: f64,
    /// Absolute voltage tolerance (V).
    pub vntol: f64,
    /// Absolute current tolerance (A); also the KCL residual bound.
    pub abstol: f64,
    /// Conductance placed across every junction (S).
    pub gmin: f64,
    pub max_newton_iters: usize,
    pub h_min: f64,
    /// Defaults to 1/50 of the simulated span.
    pub h_max: Option<f64>,
    /// Step used after every discontinuity.
    pub h_start: f64,
    /// Relative truncation-error bound on capacitor voltages.
    pub lte_tol: f64,
    /// Absolute truncation-error floor (V).
    pub lte_floor: f64,
    pub method: Method,
    /// Latch/level re-solves allowed at one timepoint.
    pub max_state_flips: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            reltol: 1e-3,
            vntol: 1e-6,
            abstol: 1e-9,
            gmin: 1e-12,
            max_newton_iters: 100,
            h_min: 1e-12,
            h_max: None,
            h_start: 1e-9,
            lte_tol: 1e-3,
            lte_floor: 1e-4,
            method: Method::Trapezoidal,
            max_state_flips: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("reltol", self.reltol),
            ("vntol", self.vntol),
            ("abstol", self.abstol),
            ("h_min", self.h_min),
            ("h_start", self.h_start),
            ("lte_tol", self.lte_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gmin >= 0.0) || !(self.lte_floor >= 0.0) {
            return Err(SolverError::InvalidConfig(
                "gmin and lte_floor must be non-negative".into(),
            ));
        }
        if let Some(h) = self.h_max {
            if !(h > 0.0) {
                return Err(SolverError::InvalidConfig(format!("h_max must be positive, got {h}")));
            }
        }
        if self.max_newton_iters == 0 {
            return Err(SolverError::InvalidConfig("max_newton_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("Newton iteration did not converge{}: worst node {node} (residual {residual:.3e} A)", at_time(*.time))]
    NoConvergence {
        time: Option<f64>,
        node: String,
        residual: f64,
    },
    #[error("timestep {h:.3e} s fell below the minimum at t = {time:.6e} s")]
    StepUnderflow { time: f64, h: f64 },
    #[error("singular matrix at pivot {pivot}")]
    SingularMatrix { pivot: usize },
    #[error("device {device} changed state more than the allowed number of times at t = {time:.6e} s")]
    StateOscillation { time: f64, device: String },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

fn at_time(t: Option<f64>) -> String {
    t.map(|t| format!(" at t = {t:.6e} s")).unwrap_or_default()
}
