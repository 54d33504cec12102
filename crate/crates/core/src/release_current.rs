//! Daily release over client-filtered pageviews: public group enumeration,
//! counting of included views, discrete Gaussian noise at σ = √(k/2ρ), and
//! suppression of noisy counts below τ. The whole run is ρ-zCDP per
//! device-day; suppression is post-processing.

use std::collections::BTreeSet;

use chrono::NaiveDate;

use crate::accounting;
use crate::dataio::{AnnotatedPageview, CountryCode, GlobalDailyRow, GroupKey};
use crate::groups::{self, GroupTable, ReleaseOutput, ReleaseStats};
use crate::noise::NoiseSpec;
use crate::ReleaseError;

pub const DEFAULT_K: u64 = 10;
pub const DEFAULT_RHO: f64 = 0.015;
pub const DEFAULT_INGESTION_THRESHOLD: i64 = 150;
pub const DEFAULT_SUPPRESSION_THRESHOLD: i64 = 90;

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentRunConfig {
    pub k: u64,
    pub rho: f64,
    pub ingestion_threshold: i64,
    pub suppression_threshold: i64,
    pub countries: BTreeSet<CountryCode>,
    pub date: NaiveDate,
    pub seed: u64,
    /// `false` only for oracle testing; the output is then not private.
    pub add_noise: bool,
}

impl CurrentRunConfig {
    pub fn new(date: NaiveDate, countries: BTreeSet<CountryCode>) -> Self {
        CurrentRunConfig {
            k: DEFAULT_K,
            rho: DEFAULT_RHO,
            ingestion_threshold: DEFAULT_INGESTION_THRESHOLD,
            suppression_threshold: DEFAULT_SUPPRESSION_THRESHOLD,
            countries,
            date,
            seed: 0,
            add_noise: true,
        }
    }

    pub fn validate(&self) -> Result<(), ReleaseError> {
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
        noise_scale(self)?;
        Ok(())
    }
}

pub fn noise_scale(config: &CurrentRunConfig) -> Result<f64, ReleaseError> {
    Ok(accounting::gaussian_sigma(config.k, config.rho)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncludedCounts {
    pub table: GroupTable,
    /// Included events matching no enumerated group.
    pub discarded: usize,
    /// Events flagged `false` by the client filter.
    pub excluded: usize,
}

/// Counts included events per enumerated group; every group appears, with 0
/// when nothing matched.
pub fn count_included(events: &[AnnotatedPageview], groups: &BTreeSet<GroupKey>) -> IncludedCounts {
    let mut table: GroupTable = groups.iter().map(|g| (g.clone(), 0)).collect();
    let mut discarded = 0;
    let mut excluded = 0;
    for a in events {
        if !a.include {
            excluded += 1;
            continue;
        }
        let key = GroupKey::new(&a.event.page, a.event.date(), a.event.country);
        match table.get_mut(&key) {
            Some(c) => *c += 1,
            None => discarded += 1,
        }
    }
    IncludedCounts {
        table,
        discarded,
        excluded,
    }
}

/// Runs the release for `config.date`. Public rows for other dates are ignored,
/// as are events on other dates (they match no group).
pub fn release(
    config: &CurrentRunConfig,
    events: &[AnnotatedPageview],
    global_daily: &[GlobalDailyRow],
) -> Result<ReleaseOutput, ReleaseError> {
    config.validate()?;
    let daily = groups::rows_for_date(global_daily, config.date);
    let groups =
        groups::enumerate_groups(&daily, &config.countries, config.ingestion_threshold, config.date)?;
    let counted = count_included(events, &groups);

    let (sampler, scale) = if config.add_noise {
        let sigma = noise_scale(config)?;
        (Some(NoiseSpec::discrete_gaussian(sigma)?.sampler()), Some(sigma))
    } else {
        (None, None)
    };
    let noisy = groups::add_noise(&counted.table, sampler.as_ref(), config.seed);
    let (rows, suppressed) = groups::suppress(&noisy, config.suppression_threshold);

    let stats = ReleaseStats {
        noise_scale: scale,
        groups: groups.len(),
        rows_in: events.len(),
        included: events.len() - counted.excluded,
        discarded: counted.discarded,
        released: rows.len(),
        suppressed,
    };
    Ok(ReleaseOutput { rows, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{parse_date, parse_timestamp, PageRef, PageviewEvent};

    fn date() -> NaiveDate {
        parse_date("2023-04-02").unwrap()
    }

    fn ann(page: u64, country: &str, include: bool) -> AnnotatedPageview {
        AnnotatedPageview {
            event: PageviewEvent {
                page: PageRef::new("en.wikipedia", page).unwrap(),
                timestamp: parse_timestamp("2023-04-02T10:32:45Z").unwrap(),
                country: country.parse().unwrap(),
            },
            include,
        }
    }

    fn daily(page: u64, count: i64) -> GlobalDailyRow {
        GlobalDailyRow {
            page: PageRef::new("en.wikipedia", page).unwrap(),
            date: date(),
            count,
        }
    }

    fn countries() -> BTreeSet<CountryCode> {
        ["CH", "FR"].iter().map(|c| c.parse().unwrap()).collect()
    }

    fn groups_for(page: u64) -> BTreeSet<GroupKey> {
        groups::enumerate_groups(&[daily(page, 1000)], &countries(), 150, date()).unwrap()
    }

    fn key(page: u64, c: &str) -> GroupKey {
        GroupKey::new(
            &PageRef::new("en.wikipedia", page).unwrap(),
            date(),
            c.parse().unwrap(),
        )
    }

    #[test]
    fn counts_flagged_views() {
        let ev = vec![ann(23110294, "CH", true); 3];
        let c = count_included(&ev, &groups_for(23110294));
        assert_eq!(c.table[&key(23110294, "CH")], 3);
        assert_eq!(c.table[&key(23110294, "FR")], 0);
    }

    #[test]
    fn unflagged_views_ignored() {
        let mut ev = vec![ann(23110294, "CH", true)];
        ev.extend(vec![ann(23110294, "CH", false); 4]);
        let c = count_included(&ev, &groups_for(23110294));
        assert_eq!(c.table[&key(23110294, "CH")], 1);
        assert_eq!(c.excluded, 4);
        assert_eq!(c.discarded, 0);
    }

    #[test]
    fn unenumerated_page_discarded() {
        let c = count_included(&[ann(5, "CH", true)], &groups_for(23110294));
        assert_eq!(c.discarded, 1);
        assert!(c.table.values().all(|&v| v == 0));
    }

    #[test]
    fn no_noise_and_zero_tau_is_identity() {
        let mut cfg = CurrentRunConfig::new(date(), countries());
        cfg.add_noise = false;
        cfg.suppression_threshold = 0;
        let events = vec![ann(1, "CH", true), ann(1, "CH", true), ann(2, "FR", true)];
        let daily = [daily(1, 500), daily(2, 500)];
        let out = release(&cfg, &events, &daily).unwrap();
        let groups = groups::enumerate_groups(&daily, &cfg.countries, 150, date()).unwrap();
        let expected = count_included(&events, &groups).table;
        let got: GroupTable = out.rows.iter().map(|r| (r.key.clone(), r.count)).collect();
        assert_eq!(got, expected);
        assert_eq!(out.stats.noise_scale, None);
        assert_eq!(out.stats.groups, 4);
    }

    #[test]
    fn large_count_survives_noise() {
        let mut cfg = CurrentRunConfig::new(date(), countries());
        cfg.seed = 99;
        let events = vec![ann(1, "CH", true); 1000];
        let out = release(&cfg, &events, &[daily(1, 5000)]).unwrap();
        let ch = out.rows.iter().find(|r| r.key == key(1, "CH")).expect("released");
        assert!((ch.count - 1000).abs() < 90);
        assert!(out.rows.iter().all(|r| r.count >= 90));
        assert!((out.stats.noise_scale.unwrap() - 18.2574).abs() < 1e-3);
    }

    #[test]
    fn replay_identical_and_sorted() {
        let mut cfg = CurrentRunConfig::new(date(), countries());
        cfg.suppression_threshold = 0;
        let events: Vec<_> = (0..50).map(|i| ann(i % 5, "FR", true)).collect();
        let daily: Vec<_> = (0..5).map(|p| daily(p, 200)).collect();
        let a = release(&cfg, &events, &daily).unwrap();
        let b = release(&cfg, &events, &daily).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.windows(2).all(|w| w[0].key < w[1].key));
    }

    #[test]
    fn invalid_config() {
        let cfg = CurrentRunConfig::new(date(), BTreeSet::new());
        assert!(matches!(
            release(&cfg, &[], &[]),
            Err(ReleaseError::InvalidConfig(_))
        ));
        let mut cfg = CurrentRunConfig::new(date(), countries());
        cfg.k = 0;
        assert!(matches!(
            release(&cfg, &[], &[]),
            Err(ReleaseError::Accounting(_))
        ));
        let mut cfg = CurrentRunConfig::new(date(), countries());
        cfg.suppression_threshold = -1;
        assert!(cfg.validate().is_err());
    }
}
