//! Planning toolkit for a 4-DOF spherical-coordinate manipulator.
//!
//! The robot has a prismatic radial extension `r` riding on a two-link
//! polar arm (`theta1`, `theta2`) that rotates about a vertical azimuth
//! `phi`. The crate provides:
//!
//! * [`params`] — validated physical constants and derived actuator data,
//! * [`kinematics`] — spherical bases, body positions, analytic Jacobians,
//! * [`inertia`] — state-coupled polar inertias and CAD-frame transforms,
//! * [`dynamics`] — numeric mass/Coriolis/gravity assembly and inverse
//!   dynamics in the standard manipulator form,
//! * [`pmp`] — closed-form minimum-acceleration cubic joint trajectories,
//! * [`gdth`] — the gradient-descent time-horizon estimator that turns a
//!   Cartesian target into joint targets plus per-joint arrival times,
//! * [`structural`] — gearshaft reaction equilibrium, azimuthal holding
//!   torque, torque surfaces and payload capacity.

pub mod dynamics;
pub mod gdth;
pub mod inertia;
pub mod kinematics;
pub mod params;
pub mod pmp;
pub mod scenario;
pub mod structural;

pub use kinematics::JointState;
pub use params::RobotParams;

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.80665;

/// Number of generalized coordinates: (r, theta1, theta2, phi).
pub const DOF: usize = 4;

/// Joint indices into 4-vectors, in coordinate order.
pub mod joint {
    pub const R: usize = 0;
    pub const THETA1: usize = 1;
    pub const THETA2: usize = 2;
    pub const PHI: usize = 3;
}

/// Errors produced by parameter validation and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter violated its documented range; names the field.
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },
    /// Configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),
    /// A matrix that must be invertible was singular.
    #[error("singular system in {context}")]
    Singular { context: &'static str },
    /// Forward integration failed at a given time.
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
