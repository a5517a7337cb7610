//! Two-step interval built from four order statistics per sample.
//!
//! If both cdfs are locally linear with slopes `m_c` and `m_t`, the extremes
//! of `y_t(j) - y_c(i)` on the boundary of the quadratic acceptance ellipse
//! sit at
//!
//! ```text
//! i = n_c q ± z sqrt(n_c n_t q (1 - q) / (n_t + n_c m_c^2 / m_t^2))
//! j = n_t q ± z sqrt(n_c n_t q (1 - q) / (n_c + n_t m_t^2 / m_c^2))
//! ```
//!
//! Step one assumes `m_c = m_t`, step two plugs in finite-difference slope
//! estimates taken between the step-one order statistics. The Lagrange
//! multiplier and the cdf intercepts cancel out of these expressions and
//! have no runtime counterpart.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal;
use crate::sample::{outward_index_pair, ConfidenceInterval, Flag, Method, OrderedSample, QuantileSpec};

/// Order-statistic indexes (1-based) bounding the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexQuad {
    pub i_minus: usize,
    pub i_plus: usize,
    pub j_minus: usize,
    pub j_plus: usize,
}

/// An [`IndexQuad`] plus whether any index was clamped onto `[1, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexSelection {
    pub quad: IndexQuad,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeEstimates {
    pub m_c: f64,
    pub m_t: f64,
    /// Set when an estimate has a zero denominator (tied order statistics).
    pub fallback: bool,
}

fn select(
    spec: &QuantileSpec,
    n_c: usize,
    n_t: usize,
    half_c: f64,
    half_t: f64,
) -> Result<IndexSelection> {
    if n_c == 0 || n_t == 0 {
        return Err(Error::EmptySample);
    }
    let q = spec.q();
    let (i_minus, i_plus, clamped_c) = outward_index_pair(n_c as f64 * q, half_c, n_c);
    let (j_minus, j_plus, clamped_t) = outward_index_pair(n_t as f64 * q, half_t, n_t);
    if i_minus == i_plus || j_minus == j_plus {
        return Err(Error::InsufficientSample(format!(
            "index pair collapses for q={q}, alpha={} with n_c={n_c}, n_t={n_t}",
            spec.alpha()
        )));
    }
    Ok(IndexSelection {
        quad: IndexQuad {
            i_minus,
            i_plus,
            j_minus,
            j_plus,
        },
        clamped: clamped_c || clamped_t,
    })
}

fn z_half(spec: &QuantileSpec) -> f64 {
    normal::upper_quantile(spec.alpha() / 2.0)
}

/// Equal-slope indexes `n q ± z s` with `s = sqrt(n_c n_t q (1-q) / (n_c + n_t))`.
pub fn step1_indexes(spec: &QuantileSpec, n_c: usize, n_t: usize) -> Result<IndexSelection> {
    let q = spec.q();
    let (nc, nt) = (n_c as f64, n_t as f64);
    let half = z_half(spec) * (nc * nt * q * (1.0 - q) / (nc + nt)).sqrt();
    select(spec, n_c, n_t, half, half)
}

/// Finite-difference cdf slopes between the quad's order statistics.
pub fn estimate_slopes(
    control: &OrderedSample,
    treatment: &OrderedSample,
    quad: &IndexQuad,
) -> SlopeEstimates {
    let slope = |sample: &OrderedSample, lo: usize, hi: usize| {
        let rise = (hi - lo) as f64 / sample.len() as f64;
        let run = sample.order_stat(hi) - sample.order_stat(lo);
        (run > 0.0).then(|| rise / run)
    };
    match (
        slope(control, quad.i_minus, quad.i_plus),
        slope(treatment, quad.j_minus, quad.j_plus),
    ) {
        (Some(m_c), Some(m_t)) => SlopeEstimates {
            m_c,
            m_t,
            fallback: false,
        },
        (m_c, m_t) => SlopeEstimates {
            m_c: m_c.unwrap_or(f64::INFINITY),
            m_t: m_t.unwrap_or(f64::INFINITY),
            fallback: true,
        },
    }
}

/// Slope-weighted indexes from the closed-form optimum.
pub fn step2_indexes(
    spec: &QuantileSpec,
    n_c: usize,
    n_t: usize,
    slopes: &SlopeEstimates,
) -> Result<IndexSelection> {
    let SlopeEstimates { m_c, m_t, fallback } = *slopes;
    if fallback || !(m_c > 0.0 && m_c.is_finite() && m_t > 0.0 && m_t.is_finite()) {
        return Err(Error::Domain(format!(
            "step two needs positive finite slopes, got m_c={m_c}, m_t={m_t}"
        )));
    }
    let q = spec.q();
    let (nc, nt) = (n_c as f64, n_t as f64);
    let ratio = m_c / m_t;
    let ratio2 = ratio * ratio;
    let numer = nc * nt * q * (1.0 - q);
    let z = z_half(spec);
    let half_c = z * (numer / (nt + nc * ratio2)).sqrt();
    let half_t = z * (numer / (nc + nt / ratio2)).sqrt();
    select(spec, n_c, n_t, half_c, half_t)
}

/// `(y_t(j-) - y_c(i+), y_t(j+) - y_c(i-))`.
pub fn quad_bounds(control: &OrderedSample, treatment: &OrderedSample, quad: &IndexQuad) -> (f64, f64) {
    (
        treatment.order_stat(quad.j_minus) - control.order_stat(quad.i_plus),
        treatment.order_stat(quad.j_plus) - control.order_stat(quad.i_minus),
    )
}

/// Everything the two-step procedure computed along the way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStepOutcome {
    pub ci: ConfidenceInterval,
    pub step1: IndexSelection,
    pub slopes: SlopeEstimates,
    /// The selection the interval was read from.
    pub used: IndexSelection,
}

pub fn two_step_ci_detailed(
    control: &OrderedSample,
    treatment: &OrderedSample,
    spec: &QuantileSpec,
) -> Result<TwoStepOutcome> {
    let (n_c, n_t) = (control.len(), treatment.len());
    let step1 = step1_indexes(spec, n_c, n_t)?;
    let slopes = estimate_slopes(control, treatment, &step1.quad);
    let mut flags = BTreeSet::new();
    let used = if slopes.fallback {
        flags.insert(Flag::SlopeFallback);
        step1
    } else {
        match step2_indexes(spec, n_c, n_t, &slopes) {
            Ok(step2) => step2,
            Err(Error::InsufficientSample(_)) => {
                flags.insert(Flag::SlopeFallback);
                step1
            }
            Err(e) => return Err(e),
        }
    };
    if used.clamped {
        flags.insert(Flag::ClampedIndex);
    }
    let (lower, upper) = quad_bounds(control, treatment, &used.quad);
    let ci = ConfidenceInterval::new(lower, upper, spec.alpha(), Method::LrTwoStep, flags)?;
    Ok(TwoStepOutcome {
        ci,
        step1,
        slopes,
        used,
    })
}

/// Two-step likelihood-ratio interval for `tau_t - tau_c`.
pub fn two_step_ci(
    control: &OrderedSample,
    treatment: &OrderedSample,
    spec: &QuantileSpec,
) -> Result<ConfidenceInterval> {
    two_step_ci_detailed(control, treatment, spec).map(|o| o.ci)
}
