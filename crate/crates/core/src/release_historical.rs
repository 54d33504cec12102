//! Release over pre-aggregated hourly data, where no per-user bound exists.
//!
//! The unit of privacy is `m` pageviews per day. Hourly counts are summed per
//! (page, country, day) over the publicly enumerated groups, two-sided
//! geometric noise at λ = m/ε is added, and sums below τ are suppressed.
//! One run covers consecutive days inside a single era.

use std::collections::BTreeSet;

use chrono::NaiveDate;

use crate::accounting;
use crate::dataio::{CountryCode, GlobalDailyRow, GroupKey, HourlyAggregateRow};
use crate::groups::{self, GroupTable, ReleaseOutput, ReleaseStats};
use crate::noise::NoiseSpec;
use crate::ReleaseError;

/// Data-collection regimes with distinct units of privacy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Era {
    /// 2015-07-01 through 2017-02-08: 300 daily pageviews (edit previews counted).
    Pre2017,
    /// 2017-02-09 through 2023-02-05: 30 daily pageviews.
    Era2017To2023,
    /// 2023-02-06 onwards: one device-day, via client-side filtering.
    Current,
}

impl Era {
    pub fn name(&self) -> &'static str {
        match self {
            Era::Pre2017 => "pre2017",
            Era::Era2017To2023 => "era2017to2023",
            Era::Current => "current",
        }
    }
}

pub fn first_data_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 7, 1).expect("valid date")
}

fn last_pre2017_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 2, 8).expect("valid date")
}

fn last_historical_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 2, 5).expect("valid date")
}

pub fn era_of(date: NaiveDate) -> Result<Era, ReleaseError> {
    if date < first_data_date() {
        Err(ReleaseError::DateBeforeDataExists(date))
    } else if date <= last_pre2017_date() {
        Ok(Era::Pre2017)
    } else if date <= last_historical_date() {
        Ok(Era::Era2017To2023)
    } else {
        Ok(Era::Current)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalRunConfig {
    pub era: Era,
    pub m: u64,
    pub epsilon: f64,
    pub ingestion_threshold: i64,
    pub suppression_threshold: i64,
    pub countries: BTreeSet<CountryCode>,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub seed: u64,
    pub add_noise: bool,
}

/// (m, τ) defaults per era; ε = 1 and t = 150 in both.
pub fn era_preset(era: Era) -> Option<(u64, i64)> {
    match era {
        Era::Pre2017 => Some((300, 3500)),
        Era::Era2017To2023 => Some((30, 450)),
        Era::Current => None,
    }
}

pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_INGESTION_THRESHOLD: i64 = 150;

impl HistoricalRunConfig {
    /// Preset configuration for the era containing `from`.
    pub fn for_range(
        from: NaiveDate,
        to: NaiveDate,
        countries: BTreeSet<CountryCode>,
    ) -> Result<Self, ReleaseError> {
        let era = era_of(from)?;
        let (m, tau) = era_preset(era).ok_or(ReleaseError::EraMismatch {
            date: from,
            expected: era,
            found: era,
        })?;
        Ok(HistoricalRunConfig {
            era,
            m,
            epsilon: DEFAULT_EPSILON,
            ingestion_threshold: DEFAULT_INGESTION_THRESHOLD,
            suppression_threshold: tau,
            countries,
            from,
            to,
            seed: 0,
            add_noise: true,
        })
    }

    pub fn validate(&self) -> Result<(), ReleaseError> {
        if self.from > self.to {
            return Err(ReleaseError::InvalidConfig(format!(
                "date range {} .. {} is empty",
                self.from, self.to
            )));
        }
        if self.countries.is_empty() {
            return Err(ReleaseError::InvalidConfig("country list is empty".into()));
        }
        if self.ingestion_threshold < 0 {
            return Err(ReleaseError::InvalidConfig(
                "ingestion threshold t must be ≥ 0".into(),
            ));
        }
        if self.suppression_threshold < 0 {
            return Err(ReleaseError::InvalidConfig(
                "suppression threshold tau must be ≥ 0".into(),
            ));
        }
        if self.era == Era::Current {
            return Err(ReleaseError::EraMismatch {
                date: self.from,
                expected: Era::Current,
                found: Era::Current,
            });
        }
        // Both ends suffice: eras are contiguous date intervals.
        for d in [self.from, self.to] {
            let found = era_of(d)?;
            if found != self.era {
                return Err(ReleaseError::EraMismatch {
                    date: d,
                    expected: self.era,
                    found,
                });
            }
        }
        noise_scale(self)?;
        Ok(())
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        let to = self.to;
        self.from.iter_days().take_while(move |d| *d <= to)
    }
}

pub fn noise_scale(config: &HistoricalRunConfig) -> Result<f64, ReleaseError> {
    Ok(accounting::laplace_scale(config.m, config.epsilon)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSums {
    pub table: GroupTable,
    /// Hourly rows matching no enumerated group.
    pub discarded: usize,
}

/// Sums hourly counts per enumerated group (matching page, country and the
/// calendar day of the hour); empty groups map to 0.
pub fn sum_groups(hourly: &[HourlyAggregateRow], groups: &BTreeSet<GroupKey>) -> GroupSums {
    let mut table: GroupTable = groups.iter().map(|g| (g.clone(), 0)).collect();
    let mut discarded = 0;
    for row in hourly {
        let key = GroupKey::new(&row.page, row.hour.date_naive(), row.country);
        match table.get_mut(&key) {
            Some(s) => *s += row.count,
            None => discarded += 1,
        }
    }
    GroupSums { table, discarded }
}

pub fn release(
    config: &HistoricalRunConfig,
    hourly: &[HourlyAggregateRow],
    global_daily: &[GlobalDailyRow],
) -> Result<ReleaseOutput, ReleaseError> {
    config.validate()?;
    let mut all_groups = BTreeSet::new();
    for date in config.dates() {
        let daily = groups::rows_for_date(global_daily, date);
        all_groups.extend(groups::enumerate_groups(
            &daily,
            &config.countries,
            config.ingestion_threshold,
            date,
        )?);
    }
    let sums = sum_groups(hourly, &all_groups);

    let (sampler, scale) = if config.add_noise {
        let lambda = noise_scale(config)?;
        (
            Some(NoiseSpec::two_sided_geometric(lambda)?.sampler()),
            Some(lambda),
        )
    } else {
        (None, None)
    };
    let noisy = groups::add_noise(&sums.table, sampler.as_ref(), config.seed);
    let (rows, suppressed) = groups::suppress(&noisy, config.suppression_threshold);

    let stats = ReleaseStats {
        noise_scale: scale,
        groups: all_groups.len(),
        rows_in: hourly.len(),
        included: hourly.len(),
        discarded: sums.discarded,
        released: rows.len(),
        suppressed,
    };
    Ok(ReleaseOutput { rows, stats })
}
