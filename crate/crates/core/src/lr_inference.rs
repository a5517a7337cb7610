//! Likelihood-ratio test of `tau_t = tau_c + d` and the conservative
//! interval obtained by searching the acceptance region in index space.
//!
//! A pair of counts `(i, j)` stands for the tile
//! `y_c(i) < tau_c < y_c(i+1)`, `y_t(j) < tau_t < y_t(j+1)`. The statistic
//! `H(i, j)` separates into a control term and a treatment term, each
//! unimodal with its minimum (zero) at `floor(q (n + 1))`. Both the line
//! search and the region scan lean on that structure to avoid touching the
//! full `n_c x n_t` grid.

use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::significant;
use crate::likelihood::{chi2_quantile_1df, chi2_sf_1df, MarginalTerm, StatisticKind, NEGATIVE_SLACK};
use crate::sample::{max_likelihood_index, ConfidenceInterval, Flag, Method, OrderedSample, QuantileSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrTestResult {
    pub d: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub i_star: usize,
    pub j_star: usize,
}

impl LrTestResult {
    /// Whether the hypothesis is rejected at level `alpha`.
    pub fn rejects(&self, alpha: f64) -> Result<bool> {
        Ok(self.statistic >= chi2_quantile_1df(alpha)?)
    }
}

/// Sequence of `(#{y_c < tau}, #{y_t - d < tau})` as `tau` sweeps the real
/// line, one entry per open interval between consecutive breakpoints.
fn count_path(control: &OrderedSample, treatment: &OrderedSample, d: f64) -> Vec<(usize, usize)> {
    let yc = control.values();
    let yt = treatment.values();
    let (mut i, mut j) = (0, 0);
    let mut path = Vec::with_capacity(yc.len() + yt.len() + 1);
    path.push((0, 0));
    loop {
        let next_c = yc.get(i).copied();
        let next_t = yt.get(j).map(|v| v - d);
        let b = match (next_c, next_t) {
            (Some(c), Some(t)) => c.min(t),
            (Some(c), None) => c,
            (None, Some(t)) => t,
            (None, None) => break,
        };
        while i < yc.len() && yc[i] == b {
            i += 1;
        }
        while j < yt.len() && yt[j] - d == b {
            j += 1;
        }
        path.push((i, j));
    }
    path
}

/// Counts `(i*, j*)` maximizing `h(i | q, n_c) h(j | q, n_t)` subject to
/// `tau_t = tau_c + d`.
///
/// Points of the count path that precede the last point with both counts at
/// or below their (lower) modes, or follow the first point with both at or
/// above their modes, are strictly dominated, so only the stretch between
/// the two unconstrained optima is evaluated. Ties resolve as in [`prefer`].
pub fn constrained_max_indexes(
    control: &OrderedSample,
    treatment: &OrderedSample,
    q: f64,
    d: f64,
) -> Result<(usize, usize)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("q must lie in (0, 1), got {q}")));
    }
    if !d.is_finite() {
        return Err(Error::Domain(format!("d must be finite, got {d}")));
    }
    let (n_c, n_t) = (control.len(), treatment.len());
    let term_c = MarginalTerm::new(StatisticKind::Exact, q, n_c)?;
    let term_t = MarginalTerm::new(StatisticKind::Exact, q, n_t)?;
    let (k_c, k_t) = (max_likelihood_index(q, n_c), max_likelihood_index(q, n_t));
    let (low_c, low_t) = (lower_mode(&term_c, k_c)?, lower_mode(&term_t, k_t)?);
    let path = count_path(control, treatment, d);

    let start = path
        .iter()
        .rposition(|&(i, j)| i <= low_c && j <= low_t)
        .expect("path starts at (0, 0)");
    let end = start
        + path[start..]
            .iter()
            .position(|&(i, j)| i >= k_c && j >= k_t)
            .expect("path ends at (n_c, n_t)");

    let mut best: Option<(f64, usize, usize)> = None;
    for &(i, j) in &path[start..=end] {
        let h = term_c.eval(i)? + term_t.eval(j)?;
        if best.is_none_or(|b| prefer((h, i, j), b, (k_c, k_t))) {
            best = Some((h, i, j));
        }
    }
    let (_, i, j) = best.expect("non-empty search range");
    Ok((i, j))
}

/// Total order on candidates: smaller statistic, then closer to the
/// unconstrained optimum `(k_c, k_t)`, then smaller `i`, then smaller `j`.
pub(crate) fn prefer(
    candidate: (f64, usize, usize),
    incumbent: (f64, usize, usize),
    modes: (usize, usize),
) -> bool {
    let distance = |i: usize, j: usize| i.abs_diff(modes.0) + j.abs_diff(modes.1);
    let (h, i, j) = candidate;
    let (bh, bi, bj) = incumbent;
    h < bh || (h == bh && (distance(i, j), i, j) < (distance(bi, bj), bi, bj))
}

/// When `q (n + 1)` is integral the counts `k - 1` and `k` share the maximum.
fn lower_mode(term: &MarginalTerm, k: usize) -> Result<usize> {
    if k > 0 && term.eval(k - 1)? <= NEGATIVE_SLACK {
        Ok(k - 1)
    } else {
        Ok(k)
    }
}

/// Likelihood-ratio test of `tau_t = tau_c + d` using the exact binomial
/// statistic and its chi-square(1) limit.
pub fn lr_test(
    control: &OrderedSample,
    treatment: &OrderedSample,
    spec: &QuantileSpec,
    d: f64,
) -> Result<LrTestResult> {
    let (i_star, j_star) = constrained_max_indexes(control, treatment, spec.q(), d)?;
    let term_c = MarginalTerm::new(StatisticKind::Exact, spec.q(), control.len())?;
    let term_t = MarginalTerm::new(StatisticKind::Exact, spec.q(), treatment.len())?;
    let statistic = term_c.eval(i_star)? + term_t.eval(j_star)?;
    Ok(LrTestResult {
        d,
        statistic,
        p_value: chi2_sf_1df(statistic)?,
        i_star,
        j_star,
    })
}

/// One margin of the acceptance region: the tabulated statistic term over
/// an index window guaranteed to contain every accepted count.
struct Margin {
    lo: usize,
    values: Vec<f64>,
}

impl Margin {
    fn new(kind: StatisticKind, q: f64, n: usize, threshold: f64) -> Result<Self> {
        let term = MarginalTerm::new(kind, q, n)?;
        let center = n as f64 * q;
        let reach = (threshold * center * (1.0 - q)).sqrt() + 1.0;
        let mut lo = (center - reach).floor().max(0.0) as usize;
        let mut hi = ((center + reach).ceil() as usize).min(n);
        if kind == StatisticKind::Exact {
            // The exact term may exceed the quadratic reach; extend until the
            // edge itself is rejected. The term is unimodal, so nothing
            // further out can be accepted.
            while lo > 0 && term.eval(lo)? < threshold {
                lo -= 1;
            }
            while hi < n && term.eval(hi)? < threshold {
                hi += 1;
            }
        }
        let values = (lo..=hi).map(|i| term.eval(i)).collect::<Result<Vec<_>>>()?;
        Ok(Self { lo, values })
    }

    fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| (self.lo + k, v))
    }
}

/// Maps a count onto an existing order statistic; count 0 has none below it.
fn order_index(k: usize, n: usize) -> (usize, bool) {
    if k == 0 {
        (1, true)
    } else if k > n {
        (n, true)
    } else {
        (k, false)
    }
}

/// Conservative interval: extremes of `y_t(j) - y_c(i)` over every pair with
/// `H(i, j) < chi2_alpha(1)`.
pub fn conservative_ci(
    control: &OrderedSample,
    treatment: &OrderedSample,
    spec: &QuantileSpec,
    kind: StatisticKind,
) -> Result<ConfidenceInterval> {
    let threshold = chi2_quantile_1df(spec.alpha())?;
    let (n_c, n_t) = (control.len(), treatment.len());
    let margin_c = Margin::new(kind, spec.q(), n_c, threshold)?;
    let margin_t = Margin::new(kind, spec.q(), n_t, threshold)?;

    let mut bounds: Option<(f64, f64)> = None;
    let mut flags = BTreeSet::new();
    for (i, h_c) in margin_c.iter() {
        if !(h_c < threshold) {
            continue;
        }
        let (ic, clamped_c) = order_index(i, n_c);
        let y_c = control.order_stat(ic);
        for (j, h_t) in margin_t.iter() {
            if !(h_c + h_t < threshold) {
                continue;
            }
            let (jc, clamped_t) = order_index(j, n_t);
            if clamped_c || clamped_t {
                flags.insert(Flag::ClampedIndex);
            }
            let diff = treatment.order_stat(jc) - y_c;
            bounds = Some(match bounds {
                None => (diff, diff),
                Some((lo, hi)) => (lo.min(diff), hi.max(diff)),
            });
        }
    }
    let (lower, upper) = bounds.ok_or(Error::DegenerateRegion)?;
    ConfidenceInterval::new(lower, upper, spec.alpha(), Method::LrConservative, flags)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub i: usize,
    pub j: usize,
    pub h: f64,
    pub accepted: bool,
}

/// The statistic over the scan windows, for plotting the acceptance region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceGrid {
    pub rows: Vec<GridRow>,
    pub alpha: f64,
    pub exact: bool,
}

impl AcceptanceGrid {
    pub fn accepted(&self) -> impl Iterator<Item = &GridRow> {
        self.rows.iter().filter(|r| r.accepted)
    }

    /// CSV with header `i,j,h,accepted`; `h` to 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "i,j,h,accepted")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                row.i,
                row.j,
                significant(row.h, 9),
                u8::from(row.accepted)
            )?;
        }
        Ok(())
    }
}

pub fn acceptance_grid(
    n_c: usize,
    n_t: usize,
    spec: &QuantileSpec,
    kind: StatisticKind,
) -> Result<AcceptanceGrid> {
    if n_c == 0 || n_t == 0 {
        return Err(Error::EmptySample);
    }
    let threshold = chi2_quantile_1df(spec.alpha())?;
    let margin_c = Margin::new(kind, spec.q(), n_c, threshold)?;
    let margin_t = Margin::new(kind, spec.q(), n_t, threshold)?;
    let mut rows = Vec::with_capacity(margin_c.values.len() * margin_t.values.len());
    for (i, h_c) in margin_c.iter() {
        for (j, h_t) in margin_t.iter() {
            let h = h_c + h_t;
            rows.push(GridRow {
                i,
                j,
                h,
                accepted: h < threshold,
            });
        }
    }
    Ok(AcceptanceGrid {
        rows,
        alpha: spec.alpha(),
        exact: kind.is_exact(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::lr_statistic;

    fn grid(values: impl Iterator<Item = f64>) -> OrderedSample {
        OrderedSample::new(values.collect::<Vec<_>>()).unwrap()
    }

    fn spec(q: f64, alpha: f64) -> QuantileSpec {
        QuantileSpec::new(q, alpha).unwrap()
    }

    /// Every `(i, j)` reachable by some `tau`, found by direct counting at a
    /// probe point inside each gap between breakpoints.
    fn brute_force_max(c: &OrderedSample, t: &OrderedSample, q: f64, d: f64) -> (usize, usize, f64) {
        let shifted: Vec<f64> = t.values().iter().map(|v| v - d).collect();
        let mut points: Vec<f64> = c.values().iter().chain(shifted.iter()).copied().collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mut probes = vec![points[0] - 1.0, points[points.len() - 1] + 1.0];
        probes.extend(points.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        let s = spec(q, 0.05);
        let mut best: Option<(f64, usize, usize)> = None;
        for tau in probes {
            let i = c.values().iter().filter(|&&v| v < tau).count();
            let j = shifted.iter().filter(|&&v| v < tau).count();
            let h = lr_statistic(StatisticKind::Exact, i, j, &s, c.len(), t.len())
                .unwrap()
                .value;
            let modes = (max_likelihood_index(q, c.len()), max_likelihood_index(q, t.len()));
            if best.is_none_or(|b| prefer((h, i, j), b, modes)) {
                best = Some((h, i, j));
            }
        }
        let (h, i, j) = best.unwrap();
        (i, j, h)
    }

    #[test]
    fn identical_samples_have_zero_statistic() {
        let c = grid((1..=101).map(f64::from));
        assert_eq!(constrained_max_indexes(&c, &c, 0.5, 0.0).unwrap(), (51, 51));
        let r = lr_test(&c, &c, &spec(0.5, 0.05), 0.0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.rejects(0.05).unwrap());
    }

    #[test]
    fn exact_shift_has_zero_statistic() {
        let c = grid((1..=101).map(f64::from));
        let t = c.affine(1.0, 10.0).unwrap();
        assert_eq!(constrained_max_indexes(&c, &t, 0.5, 10.0).unwrap(), (51, 51));
        let r = lr_test(&c, &t, &spec(0.5, 0.05), 10.0).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn misaligned_hypothesis_splits_the_counts() {
        let c = grid((1..=101).map(f64::from));
        let (i, j) = constrained_max_indexes(&c, &c, 0.5, 5.0).unwrap();
        assert!((i < 51 && j > 51) || (i > 51 && j < 51), "({i}, {j})");
        let (bi, bj, bh) = brute_force_max(&c, &c, 0.5, 5.0);
        assert_eq!((i, j), (bi, bj));
        let r = lr_test(&c, &c, &spec(0.5, 0.05), 5.0).unwrap();
        assert_eq!(r.statistic, bh);
        assert!(r.statistic > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn line_search_matches_brute_force() {
        let cases: Vec<(Vec<f64>, Vec<f64>)> = vec![
            ((0..30).map(|k| (k * 7 % 13) as f64).collect(), (0..17).map(|k| k as f64 * 0.8).collect()),
            ((0..9).map(|k| (k as f64).sqrt()).collect(), (0..40).map(|k| (k % 5) as f64).collect()),
            (vec![3.0; 12], vec![3.0, 3.0, 4.0, 5.0, 5.0]),
            (vec![1.0], vec![2.0]),
        ];
        for (cv, tv) in cases {
            let c = OrderedSample::new(cv).unwrap();
            let t = OrderedSample::new(tv).unwrap();
            for q in [0.1, 0.3, 0.5, 0.8] {
                for d in [-3.0, -0.5, 0.0, 0.4, 1.0, 2.5, 100.0] {
                    let (i, j) = constrained_max_indexes(&c, &t, q, d).unwrap();
                    let (bi, bj, _) = brute_force_max(&c, &t, q, d);
                    assert_eq!((i, j), (bi, bj), "q={q} d={d}");
                }
            }
        }
    }

    #[test]
    fn conservative_ci_contains_zero_for_identical_samples() {
        let c = grid((0..57).map(|k| ((k * 31) % 57) as f64 / 7.0));
        for q in [0.2, 0.5, 0.9] {
            for kind in [StatisticKind::Exact, StatisticKind::Asymptotic] {
                let ci = conservative_ci(&c, &c, &spec(q, 0.05), kind).unwrap();
                assert!(ci.contains(0.0), "q={q} {kind:?}: {ci:?}");
                assert_eq!(ci.method, Method::LrConservative);
            }
        }
    }

    #[test]
    fn conservative_ci_translates_with_treatment() {
        let c = grid((0..40).map(|k| (k as f64).powf(1.3)));
        let t = grid((0..35).map(|k| (k as f64 * 1.7).sin() * 10.0));
        let s = spec(0.5, 0.05);
        let base = conservative_ci(&c, &t, &s, StatisticKind::Exact).unwrap();
        let moved = conservative_ci(&c, &t.affine(1.0, 2.5).unwrap(), &s, StatisticKind::Exact).unwrap();
        assert!((moved.lower - base.lower - 2.5).abs() < 1e-12);
        assert!((moved.upper - base.upper - 2.5).abs() < 1e-12);
    }

    #[test]
    fn conservative_ci_flags_clamped_indexes() {
        let c = grid([1.0, 2.0, 3.0].into_iter());
        let ci = conservative_ci(&c, &c, &spec(0.5, 0.05), StatisticKind::Exact).unwrap();
        assert!(ci.has_flag(Flag::ClampedIndex));
        assert!(ci.contains(0.0));
    }

    #[test]
    fn grid_matches_ellipse() {
        let s = spec(0.5, 0.05);
        let g = acceptance_grid(101, 101, &s, StatisticKind::Asymptotic).unwrap();
        let threshold = chi2_quantile_1df(0.05).unwrap();
        for row in &g.rows {
            let quad = (row.i as f64 - 50.5).powi(2) / 25.25 + (row.j as f64 - 50.5).powi(2) / 25.25;
            assert!((row.h - quad).abs() < 1e-9);
            assert_eq!(row.accepted, row.h < threshold);
        }
        // every integer point inside the ellipse appears in the grid
        let inside = (0..=101usize)
            .flat_map(|i| (0..=101usize).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                (i as f64 - 50.5).powi(2) / 25.25 + (j as f64 - 50.5).powi(2) / 25.25 < threshold
            })
            .count();
        assert_eq!(g.accepted().count(), inside);
    }

    #[test]
    fn grid_near_empty_for_tiny_threshold() {
        let g = acceptance_grid(101, 101, &spec(0.5, 0.9999), StatisticKind::Exact).unwrap();
        let accepted: Vec<_> = g.accepted().collect();
        assert!(!accepted.is_empty() && accepted.len() <= 4, "{}", accepted.len());
        assert!(accepted.iter().all(|r| r.h < 1e-7));
    }

    #[test]
    fn grid_smallest_case() {
        let g = acceptance_grid(1, 1, &spec(0.5, 0.05), StatisticKind::Exact).unwrap();
        let cells: Vec<_> = g.rows.iter().map(|r| (r.i, r.j)).collect();
        assert_eq!(cells, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert!(g.rows.iter().all(|r| r.h.is_finite() && r.h >= 0.0));
    }

    #[test]
    fn grid_csv_layout() {
        let g = acceptance_grid(1, 1, &spec(0.5, 0.05), StatisticKind::Asymptotic).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "i,j,h,accepted\n0,0,2,1\n0,1,2,1\n1,0,2,1\n1,1,2,1\n");
    }
}
