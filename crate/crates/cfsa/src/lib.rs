//! Counterfactual bias scoring and mitigation for binary tabular classification.
//!
//! The crate implements a complete fairness pipeline:
//!
//! 1. **Score** every training row's counterfactual bias: how a model's
//!    decision changes when only the row's sensitive attribute is flipped
//!    ([`cblist`]).
//! 2. **Rebalance** the training data so both groups share the same grant
//!    rate, removing the most biased rows first ([`debias`]).
//! 3. **Correct labels** of rows the scoring flagged as victims of bias,
//!    and **synthesize** replacements for removed rows by interpolating
//!    within clusters of their subgroup ([`synth`]).
//! 4. **Train** a fairness-oriented model on the corrected data and a
//!    performance-oriented model on the original data ([`classifier`]),
//!    then blend their probabilities in a weighted **ensemble**
//!    ([`ensemble`]).
//! 5. **Measure** group fairness and predictive performance ([`metrics`])
//!    and judge the result against a mutation-based trade-off baseline
//!    ([`tradeoff`]).
//!
//! The [`pipeline`] module wires these stages into reproducible, reportable
//! runs; [`fixtures`] generates synthetic datasets with known injected bias
//! so every stage can be validated against ground truth.

pub mod cblist;
pub mod classifier;
pub mod dataset;
pub mod debias;
pub mod ensemble;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub(crate) mod rng;
pub mod synth;
pub mod tradeoff;

pub use dataset::{Dataset, Schema, Subgroup, SubgroupCounts};
pub use error::{Error, Result};

/// Compiles and runs every code block of the guide in `book/` as a doctest,
/// so the book can never drift from the API it documents. The modules exist
/// only while collecting doctests.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(overview, "../../../book/src/overview.md");
    chapter!(datasets, "../../../book/src/datasets.md");
    chapter!(fixtures, "../../../book/src/fixtures.md");
    chapter!(scoring, "../../../book/src/scoring.md");
    chapter!(bias_list, "../../../book/src/bias-list.md");
    chapter!(rebalancing, "../../../book/src/rebalancing.md");
    chapter!(debiasing, "../../../book/src/debiasing.md");
    chapter!(synthesis, "../../../book/src/synthesis.md");
    chapter!(metrics, "../../../book/src/metrics.md");
    chapter!(tradeoff, "../../../book/src/tradeoff.md");
    chapter!(ensembles, "../../../book/src/ensembles.md");
    chapter!(pipeline, "../../../book/src/pipeline.md");
    chapter!(cli, "../../../book/src/cli.md");
    chapter!(reproducibility, "../../../book/src/reproducibility.md");
}
