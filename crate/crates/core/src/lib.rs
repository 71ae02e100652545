//! Bernstein- and Bennett-type deviation bounds for partial sums of weakly
//! dependent stationary sequences, together with the machinery to check
//! them empirically.
//!
//! The crate is split into five layers:
//!
//! * [`bounds`]: closed-form thresholds, tail bounds, rate functions and the
//!   block-size selectors that feed them.
//! * [`coefficients`]: dependence-coefficient profiles for the example
//!   process families (doubling map, expanding maps, contracting Markov
//!   kernels, chains with infinite memory, Bernoulli shifts).
//! * [`processes`]: seeded simulators for those families, observables from
//!   the bounded Lipschitz class, and coupled-block construction.
//! * [`estimation`]: Monte Carlo estimates of block variances, tail
//!   probabilities (with exact binomial intervals) and coupling distances.
//! * [`harness`]: experiment configuration, end-to-end verification runs and
//!   CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod coefficients;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod processes;
pub mod rng;

pub use bounds::{BlockSelection, DependenceProfile, ProfileKind, VarianceProfile, VarianceSource};
pub use coefficients::{ShiftRegularity, WeightSequence};
pub use error::{Error, Result};
pub use estimation::{SigmaEstimate, TailEstimate, Workers};
pub use harness::{ExperimentConfig, ReportRow, Theorem, Verdict};
pub use processes::{CoupledBlock, ObservableF, ObservableKind, ProcessModel};
