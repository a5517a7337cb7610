//! Two-sample difference-in-quantile inference built on the binomial
//! likelihood of order-statistic positions.
//!
//! The crate provides a likelihood-ratio test for `tau_t = tau_c + d`, a
//! conservative interval found by searching the acceptance region in index
//! space, a fast two-step interval that needs only four order statistics
//! per sample, Price-Bonnet and Donner-Zou comparators, and a seeded Monte
//! Carlo harness for coverage studies.

pub mod baselines;
pub mod error;
pub mod fast_ci;
pub mod fmt;
pub mod likelihood;
pub mod lr_inference;
pub mod normal;
pub mod sample;
pub mod sim;

pub use error::{Error, Result};
pub use sample::{
    ingest_sample, max_likelihood_index, quantile_point_estimate, ConfidenceInterval, Flag,
    Method, OrderedSample, QuantileSpec,
};

use likelihood::StatisticKind;

/// Interval for `tau_t - tau_c` by `method`. `kind` only affects
/// [`Method::LrConservative`].
pub fn difference_interval(
    method: Method,
    control: &OrderedSample,
    treatment: &OrderedSample,
    spec: &QuantileSpec,
    kind: StatisticKind,
) -> Result<ConfidenceInterval> {
    match method {
        Method::LrConservative => lr_inference::conservative_ci(control, treatment, spec, kind),
        Method::LrTwoStep => fast_ci::two_step_ci(control, treatment, spec),
        Method::PriceBonnet => baselines::price_bonnet_ci(control, treatment, spec),
        Method::DonnerZou => baselines::donner_zou_ci(control, treatment, spec),
        Method::OneSample => Err(Error::Domain(
            "one_sample is a single-sample interval, not a difference".into(),
        )),
    }
}
