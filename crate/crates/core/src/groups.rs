//! Group enumeration, keyed noise and suppression shared by both release paths.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::dataio::{CountryCode, GlobalDailyRow, GroupKey, ReleaseRow};
use crate::noise::{RngStream, Sampler};
use crate::ReleaseError;

/// True (or bounded) count per enumerated group.
pub type GroupTable = BTreeMap<GroupKey, i64>;

/// Cross product of the pages with public global count `n ≥ t` on `date`
/// and the country list. Reads public data only.
pub fn enumerate_groups(
    global_daily: &[GlobalDailyRow],
    countries: &BTreeSet<CountryCode>,
    ingestion_threshold: i64,
    date: NaiveDate,
) -> Result<BTreeSet<GroupKey>, ReleaseError> {
    let mut groups = BTreeSet::new();
    for row in global_daily {
        if row.date != date {
            return Err(ReleaseError::DateMismatch {
                expected: date,
                found: row.date,
            });
        }
        if row.count >= ingestion_threshold {
            for &c in countries {
                groups.insert(GroupKey::new(&row.page, date, c));
            }
        }
    }
    Ok(groups)
}

/// Public daily rows for one date.
pub fn rows_for_date(global_daily: &[GlobalDailyRow], date: NaiveDate) -> Vec<GlobalDailyRow> {
    global_daily.iter().filter(|r| r.date == date).cloned().collect()
}

/// Noise stream of one group: independent of iteration order.
pub fn group_stream(seed: u64, key: &GroupKey) -> RngStream {
    RngStream::new(seed, RngStream::stream_id(&key.canonical_bytes()))
}

/// Adds one keyed noise draw per group. `None` disables noise (oracle tests).
pub fn add_noise(table: &GroupTable, sampler: Option<&Sampler>, seed: u64) -> Vec<ReleaseRow> {
    table
        .iter()
        .map(|(key, &count)| {
            let noise = match sampler {
                Some(s) => s.sample(&mut group_stream(seed, key).rng()),
                None => 0,
            };
            ReleaseRow {
                key: key.clone(),
                count: count + noise,
            }
        })
        .collect()
}

/// Drops rows with a noisy count strictly below `tau`; returns the kept rows
/// and the number suppressed. Order is preserved.
pub fn suppress(noisy: &[ReleaseRow], tau: i64) -> (Vec<ReleaseRow>, usize) {
    let kept: Vec<ReleaseRow> = noisy.iter().filter(|r| r.count >= tau).cloned().collect();
    let suppressed = noisy.len() - kept.len();
    (kept, suppressed)
}

/// Counters recorded for a release run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReleaseStats {
    /// σ (current) or λ (historical); `None` when noise was disabled.
    pub noise_scale: Option<f64>,
    pub groups: usize,
    pub rows_in: usize,
    /// Rows flagged for inclusion (current data only).
    pub included: usize,
    /// Included rows or hourly aggregates that matched no enumerated group.
    pub discarded: usize,
    pub released: usize,
    pub suppressed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseOutput {
    pub rows: Vec<ReleaseRow>,
    pub stats: ReleaseStats,
}
