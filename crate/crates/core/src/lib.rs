//! Causal analysis of machine fairness on discrete data.
//!
//! The crate answers four questions about a binary-prediction setting with a
//! sensitive attribute `A`, a true label `Y`, and a prediction `Yhat`:
//!
//! 1. **Which independences does a data-generating graph force?**
//!    [`graph`] holds causal DAGs and an exact d-separation engine.
//! 2. **How far is a concrete distribution from each fairness metric?**
//!    [`dist`] computes exact joints and conditional-independence gaps;
//!    [`fairness`] turns them into demographic parity, equalized odds, and
//!    predictive parity audits.
//! 3. **Can several metrics hold at once?** [`fairness::impossibility_scan`]
//!    brute-forces every small grid distribution and confirms that at most
//!    one metric survives once the preconditions hold and degenerate
//!    predictors are set aside.
//! 4. **What does label correction buy?** [`scm`] builds structural causal
//!    models, inserts a correction gate between label and prediction, and
//!    sweeps its strength.
//!
//! The group convention everywhere: state 0 of the sensitive attribute is
//! the advantaged group, state 1 the disadvantaged group.
//!
//! ```
//! use faircause::fairness::{audit, FairnessTriple};
//! use faircause::scm::examples::hiring_scm;
//!
//! let joint = hiring_scm().exact_joint::<&str>(&[]).unwrap();
//! let report = audit(&joint, &FairnessTriple::standard(), 0.01, 0.05).unwrap();
//! assert!(report.satisfied.eo && !report.satisfied.dp);
//! ```

pub mod dist;
pub mod error;
pub mod fairness;
pub mod graph;
#[doc(hidden)]
pub mod guide;
pub mod scm;

pub use error::{Error, Result};
