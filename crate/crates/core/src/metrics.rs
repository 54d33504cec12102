//! Utility of a release measured against the true group-by: no contribution
//! bounding, no noise, no suppression. All statistics are row-weighted.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use thiserror::Error;

use crate::dataio::{GroupKey, HourlyAggregateRow, PageviewEvent, ReleaseRow};

pub const TOP_N: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("true baseline is empty; top-{TOP_N} drop rate is undefined")]
    EmptyBaseline,
}

/// True counts of every group that occurs in the raw input. Zero cells are implicit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrueBaseline {
    counts: BTreeMap<GroupKey, i64>,
}

impl TrueBaseline {
    /// Counts every event; inclusion flags play no part in the baseline.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a PageviewEvent>) -> Self {
        let mut counts = BTreeMap::new();
        for e in events {
            *counts
                .entry(GroupKey::new(&e.page, e.date(), e.country))
                .or_insert(0) += 1;
        }
        TrueBaseline { counts }
    }

    pub fn from_hourly(rows: &[HourlyAggregateRow]) -> Self {
        let mut counts = BTreeMap::new();
        for r in rows {
            *counts
                .entry(GroupKey::new(&r.page, r.hour.date_naive(), r.country))
                .or_insert(0) += r.count;
        }
        counts.retain(|_, c| *c > 0);
        TrueBaseline { counts }
    }

    /// Keeps only groups dated within `from..=to`.
    pub fn restrict_dates(&self, from: NaiveDate, to: NaiveDate) -> Self {
        TrueBaseline {
            counts: self
                .counts
                .iter()
                .filter(|(k, _)| k.date >= from && k.date <= to)
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
        }
    }

    pub fn get(&self, key: &GroupKey) -> i64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupKey, i64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeErrorBuckets {
    pub under_10: f64,
    pub under_25: f64,
    pub under_50: f64,
    /// Released rows with a non-zero true count.
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropRates {
    pub above_threshold: f64,
    pub above_threshold_support: usize,
    pub top1000: f64,
    pub top1000_support: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UtilityReport {
    pub re_under_10: f64,
    pub re_under_25: f64,
    pub re_under_50: f64,
    pub re_support: usize,
    pub drop_rate_above_threshold: f64,
    pub drop_above_support: usize,
    pub top1000_drop_rate: f64,
    pub top1000_support: usize,
    pub spurious_rate: f64,
    /// Number of released rows.
    pub spurious_support: usize,
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fractions of released rows (true count ≥ 1) with |ĉ − c| / c below 10%, 25%, 50%.
pub fn relative_error_distribution(release: &[ReleaseRow], baseline: &TrueBaseline) -> RelativeErrorBuckets {
    let (mut n10, mut n25, mut n50, mut support) = (0, 0, 0, 0);
    for row in release {
        let c = baseline.get(&row.key);
        if c < 1 {
            continue;
        }
        support += 1;
        // |ĉ − c| / c < 1/d  ⇔  d·|ĉ − c| < c, in exact integer arithmetic.
        let err = (row.count as i128 - c as i128).abs();
        let c = c as i128;
        n10 += usize::from(10 * err < c);
        n25 += usize::from(4 * err < c);
        n50 += usize::from(2 * err < c);
    }
    RelativeErrorBuckets {
        under_10: fraction(n10, support),
        under_25: fraction(n25, support),
        under_50: fraction(n50, support),
        support,
    }
}

/// Share of baseline groups with true count > `threshold` missing from the
/// release, and share of the 1000 largest baseline groups missing from it
/// (ties broken by key order).
pub fn drop_rates(
    release: &[ReleaseRow],
    baseline: &TrueBaseline,
    threshold: i64,
) -> Result<DropRates, MetricsError> {
    if baseline.is_empty() {
        return Err(MetricsError::EmptyBaseline);
    }
    let released: BTreeSet<&GroupKey> = release.iter().map(|r| &r.key).collect();

    let above: Vec<&GroupKey> = baseline
        .iter()
        .filter(|(_, c)| *c > threshold)
        .map(|(k, _)| k)
        .collect();
    let dropped_above = above.iter().filter(|k| !released.contains(*k)).count();

    let mut ranked: Vec<(&GroupKey, i64)> = baseline.iter().collect();
    // BTreeMap iteration is key-ordered, so a stable sort keeps key order on ties.
    ranked.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
    ranked.truncate(TOP_N);
    let dropped_top = ranked.iter().filter(|(k, _)| !released.contains(*k)).count();

    Ok(DropRates {
        above_threshold: fraction(dropped_above, above.len()),
        above_threshold_support: above.len(),
        top1000: fraction(dropped_top, ranked.len()),
        top1000_support: ranked.len(),
    })
}

/// Number of released rows whose true count is zero.
pub fn spurious_count(release: &[ReleaseRow], baseline: &TrueBaseline) -> usize {
    release.iter().filter(|r| baseline.get(&r.key) == 0).count()
}

pub fn spurious_rate(release: &[ReleaseRow], baseline: &TrueBaseline) -> f64 {
    fraction(spurious_count(release, baseline), release.len())
}

pub fn evaluate(
    release: &[ReleaseRow],
    baseline: &TrueBaseline,
    threshold: i64,
) -> Result<UtilityReport, MetricsError> {
    let re = relative_error_distribution(release, baseline);
    let drops = drop_rates(release, baseline, threshold)?;
    Ok(UtilityReport {
        re_under_10: re.under_10,
        re_under_25: re.under_25,
        re_under_50: re.under_50,
        re_support: re.support,
        drop_rate_above_threshold: drops.above_threshold,
        drop_above_support: drops.above_threshold_support,
        top1000_drop_rate: drops.top1000,
        top1000_support: drops.top1000_support,
        spurious_rate: spurious_rate(release, baseline),
        spurious_support: release.len(),
    })
}

impl UtilityReport {
    /// `(name, value)` pairs in a fixed order, for key=value and TSV output.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("re_under_10", format!("{:.6}", self.re_under_10)),
            ("re_under_25", format!("{:.6}", self.re_under_25)),
            ("re_under_50", format!("{:.6}", self.re_under_50)),
            ("re_support", self.re_support.to_string()),
            (
                "drop_rate_above_threshold",
                format!("{:.6}", self.drop_rate_above_threshold),
            ),
            ("drop_above_support", self.drop_above_support.to_string()),
            ("top1000_drop_rate", format!("{:.6}", self.top1000_drop_rate)),
            ("top1000_support", self.top1000_support.to_string()),
            ("spurious_rate", format!("{:.6}", self.spurious_rate)),
            ("spurious_support", self.spurious_support.to_string()),
        ]
    }
}
