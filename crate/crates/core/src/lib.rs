//! Safety-filtered admittance control for a two-link planar manipulator.
//!
//! The closed loop is built from independent pieces:
//!
//! * [`model`]: joint and Cartesian dynamics of the two-link arm.
//! * [`admittance`]: the mass-spring-damper reference generator driven by an
//!   interaction force.
//! * [`ecbf`]: exponential control barrier function rows for workspace and
//!   obstacle constraints, and the force filter built on them.
//! * [`qp`]: an exact active-set enumeration solver for the small projection
//!   QPs the filter produces.
//! * [`fxtismc`]: a fixed-time integral sliding-mode Cartesian tracker.
//! * [`sim`]: the fixed-step loop tying everything together, plus scenario
//!   presets.
//! * [`io`]: configuration files, CSV traces, SVG plots and run reports.
//! * [`cli`]: the `safeguard` command-line front end.

pub mod admittance;
pub mod cli;
pub mod ecbf;
pub mod error;
pub mod fxtismc;
pub mod integrate;
pub mod io;
pub mod model;
pub mod qp;
pub mod sim;

pub use error::{Error, Result};

/// Two-component column vector used for every planar quantity.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2×2 matrix used for inertia, Jacobians and input maps.
pub type Mat2 = nalgebra::Matrix2<f64>;
