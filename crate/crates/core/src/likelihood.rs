//! Binomial likelihood of an order-statistic position and the
//! likelihood-ratio statistic built from it.
//!
//! `log_binomial_pmf` follows Loader's saddle-point formulation: the
//! log-probability is assembled from Stirling-series remainders and a
//! deviance term instead of differences of large log-gamma values, so the
//! result keeps full relative precision for `n` in the hundreds of millions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal;
use crate::sample::{max_likelihood_index, QuantileSpec};

/// Rounding slack below zero that is silently clamped.
pub const NEGATIVE_SLACK: f64 = 1e-9;

/// `ln Γ(n + 1) - (n + 1/2) ln n + n - ln √(2π)` for n = 1..=15.
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

fn stirlerr(n: usize) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15 {
        return STIRLERR_TABLE[n];
    }
    let nf = n as f64;
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance `x ln(x / m) + m - x`, evaluated by series when `x` is near `m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1.0;
        loop {
            ej *= v2;
            let next = s + ej / (2.0 * j + 1.0);
            if next == s {
                return next;
            }
            s = next;
            j += 1.0;
        }
    }
    x * (x / m).ln() + m - x
}

/// `ln[C(n, i) q^i (1 - q)^(n - i)]`.
pub fn log_binomial_pmf(i: usize, q: f64, n: usize) -> Result<f64> {
    if i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("q must lie in (0, 1), got {q}")));
    }
    let p_fail = 1.0 - q;
    let nf = n as f64;
    if i == 0 {
        return Ok(nf * (-q).ln_1p());
    }
    if i == n {
        return Ok(nf * q.ln());
    }
    let x = i as f64;
    let rest = (n - i) as f64;
    let lc = stirlerr(n) - stirlerr(i) - stirlerr(n - i) - bd0(x, nf * q) - bd0(rest, nf * p_fail);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / nf).ln_1p();
    Ok(lc - 0.5 * lf)
}

/// Which form of the likelihood-ratio statistic to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `-2 ln` ratio of binomial probabilities.
    Exact,
    /// Normal-limit quadratic form `(i - nq)^2 / (n q (1 - q))`.
    Asymptotic,
}

impl StatisticKind {
    pub fn from_exact(exact: bool) -> Self {
        if exact {
            StatisticKind::Exact
        } else {
            StatisticKind::Asymptotic
        }
    }

    pub fn is_exact(self) -> bool {
        self == StatisticKind::Exact
    }

    /// Exact while both samples have at most [`EXACT_MAX_N`] observations.
    pub fn default_for(n_c: usize, n_t: usize) -> Self {
        Self::from_exact(n_c.max(n_t) <= EXACT_MAX_N)
    }
}

/// Largest sample size for which the exact statistic is the default.
pub const EXACT_MAX_N: usize = 10_000;

/// One sample's contribution to the statistic at count `i`. The two-sample
/// statistic is the sum of the control and treatment terms, so scans can
/// tabulate each margin once and still reproduce [`lr_statistic`] bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct MarginalTerm {
    kind: StatisticKind,
    q: f64,
    n: usize,
    log_mode: f64,
}

impl MarginalTerm {
    pub fn new(kind: StatisticKind, q: f64, n: usize) -> Result<Self> {
        let log_mode = match kind {
            StatisticKind::Exact => log_binomial_pmf(max_likelihood_index(q, n), q, n)?,
            StatisticKind::Asymptotic => 0.0,
        };
        Ok(Self { kind, q, n, log_mode })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }

    pub fn eval(&self, i: usize) -> Result<f64> {
        if i > self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        match self.kind {
            StatisticKind::Exact => {
                let value = -2.0 * (log_binomial_pmf(i, self.q, self.n)? - self.log_mode);
                if value >= 0.0 {
                    Ok(value)
                } else if value > -NEGATIVE_SLACK {
                    Ok(0.0)
                } else {
                    Err(Error::Numerical(format!(
                        "likelihood at {i} of {} exceeds its maximum ({value})",
                        self.n
                    )))
                }
            }
            StatisticKind::Asymptotic => {
                let nf = self.n as f64;
                let dev = i as f64 - nf * self.q;
                Ok(dev * dev / (nf * self.q * (1.0 - self.q)))
            }
        }
    }
}

/// Value of the likelihood-ratio statistic `H` at a pair of counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrStatistic {
    pub value: f64,
    pub i_star: usize,
    pub j_star: usize,
    pub exact: bool,
}

/// `H(i, j)` in the requested form.
pub fn lr_statistic(
    kind: StatisticKind,
    i: usize,
    j: usize,
    spec: &QuantileSpec,
    n_c: usize,
    n_t: usize,
) -> Result<LrStatistic> {
    let control = MarginalTerm::new(kind, spec.q(), n_c)?;
    let treatment = MarginalTerm::new(kind, spec.q(), n_t)?;
    Ok(LrStatistic {
        value: control.eval(i)? + treatment.eval(j)?,
        i_star: i,
        j_star: j,
        exact: kind.is_exact(),
    })
}

/// Exact binomial form of `H(i, j)`.
pub fn lr_statistic_exact(
    i: usize,
    j: usize,
    spec: &QuantileSpec,
    n_c: usize,
    n_t: usize,
) -> Result<LrStatistic> {
    lr_statistic(StatisticKind::Exact, i, j, spec, n_c, n_t)
}

/// Large-sample quadratic form of `H(i, j)`.
pub fn lr_statistic_asymptotic(
    i: usize,
    j: usize,
    spec: &QuantileSpec,
    n_c: usize,
    n_t: usize,
) -> Result<LrStatistic> {
    lr_statistic(StatisticKind::Asymptotic, i, j, spec, n_c, n_t)
}

/// Upper-`alpha` quantile of chi-square with one degree of freedom.
pub fn chi2_quantile_1df(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let z = normal::upper_quantile(alpha / 2.0);
    Ok(z * z)
}

/// `P(chi2(1) > x)`.
pub fn chi2_sf_1df(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(normal::erfc((0.5 * x).sqrt()))
}
