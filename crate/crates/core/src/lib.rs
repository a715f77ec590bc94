//! Cylinder measures generated by row-coisometric operator systems, their
//! local scaling exponents, and the wavelet filters that produce them.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: small dense complex matrices (LU, QR eigenvalues).
//! * [`filter`]: quadrature mirror filters and the one-parameter family of
//!   four-tap filters.
//! * [`system`]: measurement systems `F_0, …, F_{N−1}` with `Σ F_i* F_i = I`.
//! * [`cylinder`]: operator and scalar measures of `N`-adic intervals and
//!   trajectory sampling.
//! * [`scale`]: predicted and empirical local scaling exponents.
//! * [`dominant`]: dominant eigenvectors and power-iteration limits.
//! * [`wavelet`]: cascade algorithm for scaling functions, wavelets and
//!   packets.
//! * [`cli`]: the `measure-scale` command line.

pub mod cli;
pub mod cylinder;
pub mod dominant;
pub mod error;
pub mod filter;
pub mod linalg;
mod par;
pub mod scale;
pub mod system;
pub mod wavelet;

pub use error::{Error, Result};
pub use filter::FilterBank;
pub use linalg::{CMatrix, CVector, C64};
pub use par::is_parallel;
pub use system::{MeasurementSystem, PureState};

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
