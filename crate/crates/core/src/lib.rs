//! Distance-covariance and energy-distance tests for categorical data.
//!
//! Under the discrete metric the distance covariance of two categorical
//! variables collapses to `n⁻² Σ (n_ij − n*_ij)²`, Pearson's χ² without its
//! denominator. Its null law is a weighted sum of independent χ²₁ variables
//! whose weights are products of eigenvalues of two multinomial covariance
//! matrices. The energy goodness-of-fit statistic has the same structure with
//! a single matrix.
//!
//! The crate is organised as:
//!
//! * [`tables`]: categorical samples, contingency tables, CSV ingestion.
//! * [`quadform`]: upper-tail probabilities of `Σ w_k Z_k²` (Ruben/Farebrother
//!   series and Imhof inversion) and the χ² survival function.
//! * [`dcov`]: the distance-covariance independence test.
//! * [`energy_gof`]: the energy goodness-of-fit test and Pearson's GOF test.
//! * [`baselines`]: Pearson, G, Fisher, permutation tests and the Patefield
//!   fixed-margins sampler.
//! * [`simulate`]: the decaying-marginals model and calibration/power studies.
//!
//! ```
//! use catenergy::{dcov, tables::ContingencyTable};
//!
//! let table = ContingencyTable::from_rows(vec![
//!     vec![12, 9, 4],
//!     vec![37, 20, 29],
//!     vec![40, 58, 44],
//!     vec![53, 55, 66],
//! ])?;
//! let outcome = dcov::dcov_independence_test(&table)?;
//! assert!((outcome.p_value - 0.0447).abs() < 1e-3);
//! # Ok::<(), catenergy::Error>(())
//! ```

pub mod baselines;
pub mod datasets;
pub mod dcov;
pub mod energy_gof;
mod error;
pub mod linalg;
pub mod outcome;
pub mod quadform;
pub mod rng;
pub mod simulate;
pub mod tables;

pub use error::{Error, Result};
pub use outcome::{Calibration, TestOutcome};
pub use quadform::{upper_tail, TailMethod, TailResult, WeightSpectrum};
pub use rng::RngStream;
pub use tables::{CategoricalSample, ContingencyTable, ProbabilityVector};
