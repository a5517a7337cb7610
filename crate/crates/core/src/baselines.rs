//! Value-space comparators: order-statistic one-sample intervals,
//! Price-Bonnet and Donner-Zou.
//!
//! One-sample bounds use normal-approximation indexes
//! `n q ± z sqrt(n q (1 - q))`, rounded outward. Price-Bonnet backs the
//! variance of each quantile estimate out of that interval's half-width,
//! `Var = ((u - l) / (2 z))^2`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal;
use crate::sample::{
    outward_index_pair, quantile_point_estimate, ConfidenceInterval, Flag, Method, OrderedSample,
    QuantileSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneSampleBounds {
    pub lower: f64,
    pub upper: f64,
    pub lower_index: usize,
    pub upper_index: usize,
    pub clamped: bool,
}

pub fn one_sample_ci(sample: &OrderedSample, spec: &QuantileSpec) -> Result<OneSampleBounds> {
    let n = sample.len();
    let q = spec.q();
    let z = normal::upper_quantile(spec.alpha() / 2.0);
    let half = z * (n as f64 * q * (1.0 - q)).sqrt();
    let (lower_index, upper_index, clamped) = outward_index_pair(n as f64 * q, half, n);
    if lower_index == upper_index {
        return Err(Error::InsufficientSample(format!(
            "one-sample interval collapses to index {lower_index} for q={q}, alpha={}, n={n}",
            spec.alpha()
        )));
    }
    Ok(OneSampleBounds {
        lower: sample.order_stat(lower_index),
        upper: sample.order_stat(upper_index),
        lower_index,
        upper_index,
        clamped,
    })
}

/// [`one_sample_ci`] wrapped as a [`ConfidenceInterval`] for the quantile itself.
pub fn one_sample_interval(sample: &OrderedSample, spec: &QuantileSpec) -> Result<ConfidenceInterval> {
    let b = one_sample_ci(sample, spec)?;
    let mut flags = BTreeSet::new();
    if b.clamped {
        flags.insert(Flag::ClampedIndex);
    }
    ConfidenceInterval::new(b.lower, b.upper, spec.alpha(), Method::OneSample, flags)
}

struct Arm {
    estimate: f64,
    bounds: OneSampleBounds,
}

fn arm(sample: &OrderedSample, spec: &QuantileSpec) -> Result<Arm> {
    Ok(Arm {
        estimate: quantile_point_estimate(sample, spec.q()),
        bounds: one_sample_ci(sample, spec)?,
    })
}

fn clamp_flags(c: &Arm, t: &Arm) -> BTreeSet<Flag> {
    let mut flags = BTreeSet::new();
    if c.bounds.clamped || t.bounds.clamped {
        flags.insert(Flag::ClampedIndex);
    }
    flags
}

pub fn price_bonnet_ci(
    control: &OrderedSample,
    treatment: &OrderedSample,
    spec: &QuantileSpec,
) -> Result<ConfidenceInterval> {
    let z = normal::upper_quantile(spec.alpha() / 2.0);
    let c = arm(control, spec)?;
    let t = arm(treatment, spec)?;
    let variance = |a: &Arm| {
        let sd = (a.bounds.upper - a.bounds.lower) / (2.0 * z);
        sd * sd
    };
    let diff = t.estimate - c.estimate;
    let half = z * (variance(&t) + variance(&c)).sqrt();
    ConfidenceInterval::new(diff - half, diff + half, spec.alpha(), Method::PriceBonnet, clamp_flags(&c, &t))
}

pub fn donner_zou_ci(
    control: &OrderedSample,
    treatment: &OrderedSample,
    spec: &QuantileSpec,
) -> Result<ConfidenceInterval> {
    let c = arm(control, spec)?;
    let t = arm(treatment, spec)?;
    let diff = t.estimate - c.estimate;
    let upper = diff + (t.bounds.upper - t.estimate).hypot(c.estimate - c.bounds.lower);
    let lower = diff - (t.estimate - t.bounds.lower).hypot(c.bounds.upper - c.estimate);
    ConfidenceInterval::new(lower, upper, spec.alpha(), Method::DonnerZou, clamp_flags(&c, &t))
}
