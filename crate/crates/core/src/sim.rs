//! Seeded Monte Carlo coverage studies.
//!
//! Each replication draws from its own ChaCha stream, keyed by the master
//! seed and selected by the replication index, so a replication's samples
//! do not depend on which thread runs it or in what order. Per-replication
//! records are folded in index order, which makes the aggregate bit-identical
//! for any degree of parallelism.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp, LogNormal, Normal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::significant;
use crate::likelihood::StatisticKind;
use crate::lr_inference::lr_test;
use crate::normal;
use crate::sample::{Method, OrderedSample, QuantileSpec};

/// Parametric family with a closed-form quantile function.
///
/// Text form (used by the CLI and the CSV output): `normal:MEAN:SD`,
/// `lognormal:MU:SIGMA`, `exponential:RATE`, `uniform:LOW:HIGH`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Distribution::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            Distribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && high > low,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid distribution parameters: {self}")))
        }
    }

    /// Exact quantile `F^-1(q)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        self.validate()?;
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("q must lie in (0, 1), got {q}")));
        }
        Ok(match *self {
            Distribution::Normal { mean, sd } => mean + sd * normal::inverse_cdf(q),
            Distribution::LogNormal { mu, sigma } => (mu + sigma * normal::inverse_cdf(q)).exp(),
            Distribution::Exponential { rate } => -(-q).ln_1p() / rate,
            Distribution::Uniform { low, high } => low + q * (high - low),
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<f64>> {
        let bad = |e: &dyn fmt::Display| Error::Domain(format!("{self}: {e}"));
        Ok(match *self {
            Distribution::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).map_err(|e| bad(&e))?;
                d.sample_iter(rng).take(n).collect()
            }
            Distribution::LogNormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).map_err(|e| bad(&e))?;
                d.sample_iter(rng).take(n).collect()
            }
            Distribution::Exponential { rate } => {
                let d = Exp::new(rate).map_err(|e| bad(&e))?;
                d.sample_iter(rng).take(n).collect()
            }
            Distribution::Uniform { low, high } => {
                let d = Uniform::new(low, high).map_err(|e| bad(&e))?;
                d.sample_iter(rng).take(n).collect()
            }
        })
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Distribution::Normal { mean, sd } => write!(f, "normal:{mean}:{sd}"),
            Distribution::LogNormal { mu, sigma } => write!(f, "lognormal:{mu}:{sigma}"),
            Distribution::Exponential { rate } => write!(f, "exponential:{rate}"),
            Distribution::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let family = parts.next().unwrap_or_default().to_ascii_lowercase();
        let params = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Domain(format!("bad distribution parameter '{p}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let dist = match (family.as_str(), params.as_slice()) {
            ("normal", &[mean, sd]) => Distribution::Normal { mean, sd },
            ("lognormal", &[mu, sigma]) => Distribution::LogNormal { mu, sigma },
            ("exponential", &[rate]) => Distribution::Exponential { rate },
            ("uniform", &[low, high]) => Distribution::Uniform { low, high },
            _ => {
                return Err(Error::Domain(format!(
                    "unrecognized distribution '{s}' (expected normal:MEAN:SD, lognormal:MU:SIGMA, \
                     exponential:RATE or uniform:LOW:HIGH)"
                )))
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// `F^-1(q)` for `dist`.
pub fn true_quantile(dist: &Distribution, q: f64) -> Result<f64> {
    dist.quantile(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub dist_c: Distribution,
    pub dist_t: Distribution,
    pub n_c: usize,
    pub n_t: usize,
    pub q: f64,
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
}

impl ScenarioSpec {
    /// Normal(0, 1) in both arms, 500 observations each, median, 95%, 5000 replications.
    pub fn reference(master_seed: u64) -> Self {
        let std_normal = Distribution::Normal { mean: 0.0, sd: 1.0 };
        Self {
            dist_c: std_normal,
            dist_t: std_normal,
            n_c: 500,
            n_t: 500,
            q: 0.5,
            alpha: 0.05,
            replications: 5000,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dist_c.validate()?;
        self.dist_t.validate()?;
        self.quantile_spec()?;
        if self.n_c == 0 || self.n_t == 0 {
            return Err(Error::EmptySample);
        }
        if self.replications == 0 {
            return Err(Error::Domain("replications must be at least 1".into()));
        }
        Ok(())
    }

    pub fn quantile_spec(&self) -> Result<QuantileSpec> {
        QuantileSpec::new(self.q, self.alpha)
    }

    /// `F_t^-1(q) - F_c^-1(q)`.
    pub fn true_delta(&self) -> Result<f64> {
        Ok(self.dist_t.quantile(self.q)? - self.dist_c.quantile(self.q)?)
    }
}

/// Draws replication `replication_index` of `spec`: control first, then
/// treatment, from the stream `(master_seed, replication_index)`.
pub fn generate_pair(spec: &ScenarioSpec, replication_index: usize) -> Result<(OrderedSample, OrderedSample)> {
    if replication_index >= spec.replications {
        return Err(Error::Domain(format!(
            "replication index {replication_index} outside 0..{}",
            spec.replications
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(replication_index as u64);
    let control = OrderedSample::new(spec.dist_c.draw(&mut rng, spec.n_c)?)?;
    let treatment = OrderedSample::new(spec.dist_t.draw(&mut rng, spec.n_t)?)?;
    Ok((control, treatment))
}

/// Outcome of one method on one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub contained: bool,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub index: usize,
    /// One entry per requested method, in request order; `None` on error.
    pub outcomes: Vec<Option<MethodOutcome>>,
    /// LR test rejection at `d = true_delta`; `None` on error.
    pub lr_reject: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub method: Method,
    pub coverage: f64,
    pub mean_width: f64,
    /// LR test rejection rate at the true difference. The test does not
    /// depend on the interval method, so every row of a study carries the
    /// same value.
    pub reject_rate_at_true_d: f64,
    /// `sqrt(coverage (1 - coverage) / successes)`.
    pub mc_stderr: f64,
    pub successes: usize,
    pub failures: usize,
}

fn check_methods(methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::Domain("at least one method is required".into()));
    }
    if methods.contains(&Method::OneSample) {
        return Err(Error::Domain("one_sample is not a two-sample method".into()));
    }
    Ok(())
}

fn run_one(spec: &ScenarioSpec, methods: &[Method], index: usize, delta: f64) -> ReplicationRecord {
    let qs = spec.quantile_spec().expect("validated");
    let kind = StatisticKind::default_for(spec.n_c, spec.n_t);
    let Ok((control, treatment)) = generate_pair(spec, index) else {
        return ReplicationRecord {
            index,
            outcomes: vec![None; methods.len()],
            lr_reject: None,
        };
    };
    let outcomes = methods
        .iter()
        .map(|&m| {
            crate::difference_interval(m, &control, &treatment, &qs, kind)
                .ok()
                .map(|ci| MethodOutcome {
                    contained: ci.contains(delta),
                    width: ci.width(),
                })
        })
        .collect();
    let lr_reject = lr_test(&control, &treatment, &qs, delta)
        .and_then(|r| r.rejects(qs.alpha()))
        .ok();
    ReplicationRecord {
        index,
        outcomes,
        lr_reject,
    }
}

/// Per-replication records in replication order, computed on the current
/// rayon pool.
pub fn run_replications(spec: &ScenarioSpec, methods: &[Method]) -> Result<Vec<ReplicationRecord>> {
    spec.validate()?;
    check_methods(methods)?;
    let delta = spec.true_delta()?;
    Ok((0..spec.replications)
        .into_par_iter()
        .map(|index| run_one(spec, methods, index, delta))
        .collect())
}

/// Folds records in replication order into one row per method.
pub fn aggregate(methods: &[Method], records: &[ReplicationRecord]) -> Vec<CoverageRow> {
    let (mut lr_rejects, mut lr_ok) = (0usize, 0usize);
    for r in records {
        if let Some(reject) = r.lr_reject {
            lr_ok += 1;
            lr_rejects += usize::from(reject);
        }
    }
    let reject_rate = lr_rejects as f64 / lr_ok as f64;
    methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let (mut hits, mut successes, mut width_sum) = (0usize, 0usize, 0.0);
            for outcome in records.iter().filter_map(|r| r.outcomes[k]) {
                successes += 1;
                hits += usize::from(outcome.contained);
                width_sum += outcome.width;
            }
            let n = successes as f64;
            let coverage = hits as f64 / n;
            CoverageRow {
                method,
                coverage,
                mean_width: width_sum / n,
                reject_rate_at_true_d: reject_rate,
                mc_stderr: (coverage * (1.0 - coverage) / n).sqrt(),
                successes,
                failures: records.len() - successes,
            }
        })
        .collect()
}

/// Coverage, mean width and LR rejection rate for each method.
pub fn run_coverage_study(spec: &ScenarioSpec, methods: &[Method]) -> Result<Vec<CoverageRow>> {
    let records = run_replications(spec, methods)?;
    Ok(aggregate(methods, &records))
}

/// [`run_coverage_study`] on a dedicated pool of `threads` workers.
pub fn run_coverage_study_with_threads(
    spec: &ScenarioSpec,
    methods: &[Method],
    threads: usize,
) -> Result<Vec<CoverageRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_coverage_study(spec, methods))
}

pub const COVERAGE_CSV_HEADER: &str =
    "method,coverage,mean_width,reject_rate,mc_stderr,failures,n_c,n_t,q,alpha,dist_c,dist_t,seed,replications";

/// Writes the coverage table; reals at 6 significant digits.
pub fn write_coverage_csv<W: Write>(spec: &ScenarioSpec, rows: &[CoverageRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{COVERAGE_CSV_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.method,
            significant(row.coverage, 6),
            significant(row.mean_width, 6),
            significant(row.reject_rate_at_true_d, 6),
            significant(row.mc_stderr, 6),
            row.failures,
            spec.n_c,
            spec.n_t,
            significant(spec.q, 6),
            significant(spec.alpha, 6),
            spec.dist_c,
            spec.dist_t,
            spec.master_seed,
            spec.replications,
        )?;
    }
    Ok(())
}
