//! Numerical toolkit for Gaussian singular integral operators on variable
//! exponent Lebesgue spaces.
//!
//! The crate evaluates the general and alternative Gaussian singular
//! integrals `T_{F,m}` / `T̄_{F,m}` built from a mean-zero profile `F`,
//! computes modulars and Luxemburg norms with respect to the Gaussian
//! measure `γ_d(dx) = π^{-d/2} e^{-|x|²} dx`, classifies exponent functions
//! (log-Hölder classes, the `P^∞_{γ_d}` decay class), and measures at desk
//! scale the quantities the boundedness theory is made of: global kernel
//! bounds, minimizer identities, covering families of admissible balls,
//! weak-type distribution functions and empirical operator norms.
//!
//! Modules follow the mathematical layering:
//!
//! * [`quad`] — quadrature schemes and adaptive integration primitives
//! * [`geometry`] — Gaussian measure, admissible balls, local/global split
//! * [`exponents`] — exponent functions and regularity class estimation
//! * [`varlebesgue`] — modulars, Luxemburg norms, Hölder pairing, maximal function
//! * [`kernels`] — profile functions, kernel evaluation and kernel bounds
//! * [`operators`] — operator application, weak-type and norm estimates
//! * [`config`] — JSON declarations for exponents, profiles and fields

pub mod config;
pub mod exponents;
pub mod geometry;
pub mod kernels;
pub mod operators;
pub mod quad;
pub mod varlebesgue;

use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs was violated.
    InvalidInput(String),
    /// A numerical routine could not reach its target (non-bracketable root,
    /// degenerate geometry, diverging extrapolation).
    Numerical(String),
    /// The function has no finite Luxemburg norm on the given scheme.
    NotInSpace(String),
    /// A claimed constant was violated; carries the witnessing point.
    Verification { message: String, witness: Vec<f64> },
    /// Malformed configuration.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::Numerical(m) => write!(f, "numerical failure: {m}"),
            Error::NotInSpace(m) => write!(f, "not in the space: {m}"),
            Error::Verification { message, witness } => {
                write!(f, "verification failure: {message} (witness {witness:?})")
            }
            Error::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
