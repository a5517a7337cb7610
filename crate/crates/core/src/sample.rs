//! Validated samples, quantile settings, and the shared interval type.
//!
//! Order statistics are addressed with 1-based logical indexes throughout
//! the public API: `y(1)` is the sample minimum and `y(n)` the maximum.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// A non-empty, ascending sample of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSample {
    values: Vec<f64>,
}

impl OrderedSample {
    /// Validates and sorts `raw`. Duplicates are kept.
    pub fn new(raw: impl Into<Vec<f64>>) -> Result<Self> {
        let mut values = raw.into();
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `k`-th order statistic, 1-based. Panics if `k` is 0 or exceeds `n`.
    pub fn order_stat(&self, k: usize) -> f64 {
        assert!(
            (1..=self.values.len()).contains(&k),
            "order statistic {k} outside [1, {}]",
            self.values.len()
        );
        self.values[k - 1]
    }

    /// Applies an order-preserving map `v -> scale * v + shift` (`scale > 0`).
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("scale must be positive, got {scale}")));
        }
        Self::new(self.values.iter().map(|v| scale * v + shift).collect::<Vec<_>>())
    }
}

/// Sorts and validates raw observations.
pub fn ingest_sample(raw: &[f64]) -> Result<OrderedSample> {
    OrderedSample::new(raw.to_vec())
}

/// Target quantile `q` and significance level `alpha`, both in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileSpec {
    q: f64,
    alpha: f64,
}

impl QuantileSpec {
    pub fn new(q: f64, alpha: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("q must lie in (0, 1), got {q}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self { q, alpha })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `floor(q (n + 1))` clamped to `[0, n]`: the count of observations below
/// the quantile that maximizes the binomial likelihood.
pub fn max_likelihood_index(q: f64, n: usize) -> usize {
    let k = (q * (n as f64 + 1.0)).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(n)
    }
}

/// Midpoint of the interval `(y(k), y(k+1))` on which the likelihood is
/// maximal, with `k = max_likelihood_index(q, n)`. Falls back to `y(1)` or
/// `y(n)` when `k` sits on the sample boundary.
pub fn quantile_point_estimate(sample: &OrderedSample, q: f64) -> f64 {
    let n = sample.len();
    let k = max_likelihood_index(q, n);
    if k == 0 {
        sample.order_stat(1)
    } else if k == n {
        sample.order_stat(n)
    } else {
        let (lo, hi) = (sample.order_stat(k), sample.order_stat(k + 1));
        lo + 0.5 * (hi - lo)
    }
}

/// Interval construction that produced a [`ConfidenceInterval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LrConservative,
    LrTwoStep,
    PriceBonnet,
    DonnerZou,
    OneSample,
}

impl Method {
    /// The two-sample methods, in the order reports list them.
    pub const DIFFERENCE: [Method; 4] = [
        Method::LrConservative,
        Method::LrTwoStep,
        Method::PriceBonnet,
        Method::DonnerZou,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LrConservative => "lr_conservative",
            Method::LrTwoStep => "lr_two_step",
            Method::PriceBonnet => "price_bonnet",
            Method::DonnerZou => "donner_zou",
            Method::OneSample => "one_sample",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr_conservative" => Ok(Method::LrConservative),
            "lr_two_step" => Ok(Method::LrTwoStep),
            "price_bonnet" => Ok(Method::PriceBonnet),
            "donner_zou" => Ok(Method::DonnerZou),
            "one_sample" => Ok(Method::OneSample),
            other => Err(Error::Domain(format!("unknown method '{other}'"))),
        }
    }
}

/// Diagnostic markers attached to an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// An index fell outside `[1, n]` and was clamped onto the sample.
    ClampedIndex,
    /// Slope estimation degenerated; the equal-slope indexes were used.
    SlopeFallback,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::ClampedIndex => "clamped_index",
            Flag::SlopeFallback => "slope_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub method: Method,
    pub flags: BTreeSet<Flag>,
}

impl ConfidenceInterval {
    pub(crate) fn new(
        lower: f64,
        upper: f64,
        alpha: f64,
        method: Method,
        flags: BTreeSet<Flag>,
    ) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::Numerical(format!(
                "{method} produced inverted interval ({lower}, {upper})"
            )));
        }
        Ok(Self {
            lower,
            upper,
            alpha,
            method,
            flags,
        })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Rounds `center ± halfwidth` outward and clamps both ends to `[1, n]`.
/// Returns `(lower, upper, clamped)`.
pub(crate) fn outward_index_pair(center: f64, halfwidth: f64, n: usize) -> (usize, usize, bool) {
    let clamp = |x: f64| -> (usize, bool) {
        if x < 1.0 {
            (1, true)
        } else if x > n as f64 {
            (n, true)
        } else {
            (x as usize, false)
        }
    };
    let (lo, lo_clamped) = clamp((center - halfwidth).floor());
    let (hi, hi_clamped) = clamp((center + halfwidth).ceil());
    (lo, hi, lo_clamped || hi_clamped)
}
