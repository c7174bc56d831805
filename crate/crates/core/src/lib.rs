//! Numerical machinery for the linear wave problem on a cusped planar domain:
//! strip transform, Green-kernel resolvents, operator-sum contour calculus,
//! Ventcel time problems and regularity certification.

pub mod cli;
pub mod contour;
pub mod error;
pub mod full_problem;
pub mod geometry;
pub mod grid;
pub mod panel;
pub mod quad;
pub mod operator_sum;
pub mod oracle_fd;
pub mod resolvent;
pub mod time_calculus;
pub mod verify;

pub use error::{CuspError, Result};
pub use num_complex::Complex64 as C64;
