//! First-passage-time toolkit for birth–death processes.
//!
//! * [`process`] defines processes by their rate tables.
//! * [`spectrum`] truncates generators and computes their eigenvalues.
//! * [`approx`] evaluates the closed-form passage-time approximations.
//! * [`bessel`] is the continuous Bessel-process reference.
//! * [`simulate`] runs exact stochastic simulation of passages and paths.
//! * [`fit`] matches the mixture density to duration samples by moments.

pub mod approx;
pub mod bessel;
pub mod cli;
pub mod error;
pub mod fit;
pub mod process;
pub mod quad;
pub mod simulate;
pub mod spectrum;
pub mod stats;

pub use approx::{
    approx_pdf_from_spec, exact_mean_hitting, i_density, mixture_moments, rho_from_mean,
    second_order_density, HittingMoments, MixtureParams,
};
pub use error::{Error, Result};
pub use process::BirthDeathSpec;
pub use simulate::{DurationKind, DurationSample};
pub use spectrum::{SpectrumReport, TruncatedGenerator};
