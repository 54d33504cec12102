//! Seeded synthetic workloads: device-level pageview streams with Zipf page
//! popularity, plus the public global-daily and private hourly aggregates
//! derived exactly from them.
//!
//! Each device draws from its own rng stream, so a device's events depend
//! only on `(seed, device index)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Timelike, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, Zipf};
use thiserror::Error;

use crate::config::{ConfigError, KvMap};
use crate::dataio::{
    self, CountryCode, DataError, DeviceEvent, GlobalDailyRow, HourlyAggregateRow, PageRef, PageviewEvent,
};
use crate::noise::RngStream;

pub const EVENTS_FILE: &str = "events.tsv";
pub const GLOBAL_DAILY_FILE: &str = "global_daily.tsv";
pub const HOURLY_FILE: &str = "hourly.tsv";
pub const COUNTRIES_FILE: &str = "countries.tsv";

const PROJECTS: [&str; 8] = [
    "en.wikipedia",
    "de.wikipedia",
    "fr.wikipedia",
    "es.wikipedia",
    "ja.wikipedia",
    "zh.wikibooks",
    "wikidata",
    "commons.wikimedia",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("unknown device {0:?}")]
    UnknownDevice(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub n_devices: u64,
    pub n_pages: u64,
    pub n_projects: u64,
    pub zipf_exponent: f64,
    /// Mean pageviews per device-day.
    pub visits_mean: f64,
    /// Gamma shape of the Poisson-Gamma visit count; 0 means plain Poisson.
    /// Smaller values give heavier-tailed per-device activity.
    pub visits_dispersion: f64,
    pub country_weights: Vec<(CountryCode, f64)>,
    pub revisit_probability: f64,
    pub start_date: NaiveDate,
    pub n_days: u32,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            n_devices: 1000,
            n_pages: 500,
            n_projects: 2,
            zipf_exponent: 1.0,
            visits_mean: 5.0,
            visits_dispersion: 2.0,
            country_weights: vec![
                ("US".parse().unwrap(), 4.0),
                ("DE".parse().unwrap(), 2.0),
                ("FR".parse().unwrap(), 2.0),
                ("CH".parse().unwrap(), 1.0),
            ],
            revisit_probability: 0.2,
            start_date: NaiveDate::from_ymd_opt(2023, 4, 2).expect("valid date"),
            n_days: 1,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub const KEYS: [&'static str; 11] = [
        "n_devices",
        "n_pages",
        "n_projects",
        "zipf_exponent",
        "visits_mean",
        "visits_dispersion",
        "countries",
        "revisit_probability",
        "start_date",
        "n_days",
        "seed",
    ];

    /// Reads the flat key=value form; unspecified keys keep their defaults.
    /// `countries` is a comma list of `CODE:weight` pairs.
    pub fn from_kv(kv: &KvMap) -> Result<Self, SynthError> {
        kv.check_keys(&Self::KEYS)?;
        let d = WorkloadSpec::default();
        let country_weights = match kv.get("countries") {
            None => d.country_weights,
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    let (c, w) = item
                        .trim()
                        .split_once(':')
                        .ok_or_else(|| ConfigError::TypeError {
                            key: "countries".into(),
                            value: raw.into(),
                            expected: "CODE:weight list",
                        })?;
                    let code = c.parse::<CountryCode>().map_err(|_| ConfigError::TypeError {
                        key: "countries".into(),
                        value: c.into(),
                        expected: "country code",
                    })?;
                    let weight = w.parse::<f64>().map_err(|_| ConfigError::TypeError {
                        key: "countries".into(),
                        value: w.into(),
                        expected: "number",
                    })?;
                    Ok((code, weight))
                })
                .collect::<Result<Vec<_>, ConfigError>>()?,
        };
        let spec = WorkloadSpec {
            n_devices: kv.parse_or("n_devices", d.n_devices)?,
            n_pages: kv.parse_or("n_pages", d.n_pages)?,
            n_projects: kv.parse_or("n_projects", d.n_projects)?,
            zipf_exponent: kv.parse_or("zipf_exponent", d.zipf_exponent)?,
            visits_mean: kv.parse_or("visits_mean", d.visits_mean)?,
            visits_dispersion: kv.parse_or("visits_dispersion", d.visits_dispersion)?,
            country_weights,
            revisit_probability: kv.parse_or("revisit_probability", d.revisit_probability)?,
            start_date: kv.date_or("start_date", d.start_date)?,
            n_days: kv.parse_or("n_days", d.n_days)?,
            seed: kv.parse_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.n_pages == 0 || self.n_projects == 0 || self.n_days == 0 {
            return bad("n_pages, n_projects and n_days must be positive");
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent > 0.0) {
            return bad("zipf_exponent must be positive");
        }
        if !(self.visits_mean.is_finite() && self.visits_mean > 0.0) {
            return bad("visits_mean must be positive");
        }
        if !(self.visits_dispersion.is_finite() && self.visits_dispersion >= 0.0) {
            return bad("visits_dispersion must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.revisit_probability) {
            return bad("revisit_probability must lie in [0, 1]");
        }
        if self.country_weights.is_empty()
            || self
                .country_weights
                .iter()
                .any(|(_, w)| !(w.is_finite() && *w > 0.0))
        {
            return bad("country weights must be non-empty and positive");
        }
        let distinct: BTreeSet<_> = self.country_weights.iter().map(|(c, _)| c).collect();
        if distinct.len() != self.country_weights.len() {
            return bad("duplicate country in weights");
        }
        Ok(())
    }

    pub fn countries(&self) -> BTreeSet<CountryCode> {
        self.country_weights.iter().map(|(c, _)| *c).collect()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        self.start_date.iter_days().take(self.n_days as usize)
    }

    /// Page of popularity rank `rank` (1-based).
    pub fn page_for_rank(&self, rank: u64) -> PageRef {
        let p = ((rank - 1) % self.n_projects) as usize;
        let project = match PROJECTS.get(p) {
            Some(name) => name.to_string(),
            None => format!("p{p}.wikipedia"),
        };
        PageRef::new(&project, 100_000 + rank).expect("valid project token")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub events: Vec<DeviceEvent>,
    pub global_daily: Vec<GlobalDailyRow>,
    pub hourly: Vec<HourlyAggregateRow>,
    pub countries: BTreeSet<CountryCode>,
}

pub fn device_id(index: u64) -> String {
    format!("d{index:08}")
}

pub fn generate(spec: &WorkloadSpec) -> Result<Workload, SynthError> {
    spec.validate()?;
    let zipf = Zipf::new(spec.n_pages as f64, spec.zipf_exponent)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let weights = WeightedIndex::new(spec.country_weights.iter().map(|(_, w)| *w))
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let activity = if spec.visits_dispersion > 0.0 {
        Some(
            Gamma::new(spec.visits_dispersion, spec.visits_mean / spec.visits_dispersion)
                .map_err(|e| SynthError::InvalidSpec(e.to_string()))?,
        )
    } else {
        None
    };
    let pages: Vec<PageRef> = (1..=spec.n_pages).map(|r| spec.page_for_rank(r)).collect();

    let mut events = Vec::new();
    for device in 0..spec.n_devices {
        let mut rng = RngStream::new(spec.seed, device).rng();
        let id = device_id(device);
        let country = spec.country_weights[weights.sample(&mut rng)].0;
        for date in spec.dates() {
            let rate = match &activity {
                Some(g) => g.sample(&mut rng),
                None => spec.visits_mean,
            };
            let visits = if rate > 0.0 {
                Poisson::new(rate)
                    .map_err(|e| SynthError::InvalidSpec(e.to_string()))?
                    .sample(&mut rng) as usize
            } else {
                0
            };
            let mut seconds: Vec<u32> = (0..visits).map(|_| rng.random_range(0..86_400)).collect();
            seconds.sort_unstable();
            let midnight = date.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
            let mut today: Vec<usize> = Vec::new();
            for s in seconds {
                let revisit = !today.is_empty() && rng.random_bool(spec.revisit_probability);
                let idx = if revisit {
                    today[rng.random_range(0..today.len())]
                } else {
                    zipf.sample(&mut rng) as usize - 1
                };
                if !today.contains(&idx) {
                    today.push(idx);
                }
                events.push(DeviceEvent {
                    device_id: id.clone(),
                    event: PageviewEvent {
                        page: pages[idx].clone(),
                        timestamp: midnight + Duration::seconds(s as i64),
                        country,
                    },
                });
            }
        }
    }
    let (global_daily, hourly) = aggregate(&events);
    Ok(Workload {
        events,
        global_daily,
        hourly,
        countries: spec.countries(),
    })
}

fn truncate_to_hour(ts: &DateTime<Utc>) -> DateTime<Utc> {
    ts.with_minute(0)
        .and_then(|t| t.with_second(0))
        .expect("valid hour")
}

/// Exact global-daily and hourly aggregates of a device event stream.
pub fn aggregate(events: &[DeviceEvent]) -> (Vec<GlobalDailyRow>, Vec<HourlyAggregateRow>) {
    let mut daily: BTreeMap<(&PageRef, NaiveDate), i64> = BTreeMap::new();
    let mut hourly: BTreeMap<(&PageRef, DateTime<Utc>, CountryCode), i64> = BTreeMap::new();
    for DeviceEvent { event, .. } in events {
        *daily.entry((&event.page, event.date())).or_insert(0) += 1;
        *hourly
            .entry((&event.page, truncate_to_hour(&event.timestamp), event.country))
            .or_insert(0) += 1;
    }
    let daily = daily
        .into_iter()
        .map(|((page, date), count)| GlobalDailyRow {
            page: page.clone(),
            date,
            count,
        })
        .collect();
    let hourly = hourly
        .into_iter()
        .map(|((page, hour, country), count)| HourlyAggregateRow {
            page: page.clone(),
            hour,
            country,
            count,
        })
        .collect();
    (daily, hourly)
}

/// Appends views of `pages` for `device` on `date`, after the device's
/// existing events that day, then restores per-device time order.
pub fn inject_views(
    mut events: Vec<DeviceEvent>,
    device: &str,
    date: NaiveDate,
    pages: impl IntoIterator<Item = PageRef>,
) -> Result<Vec<DeviceEvent>, SynthError> {
    let mine: Vec<&DeviceEvent> = events.iter().filter(|e| e.device_id == device).collect();
    let Some(first) = mine.first() else {
        return Err(SynthError::UnknownDevice(device.to_string()));
    };
    let country = first.event.country;
    let timestamp = mine
        .iter()
        .filter(|e| e.event.date() == date)
        .map(|e| e.event.timestamp)
        .max()
        .unwrap_or_else(|| date.and_hms_opt(12, 0, 0).expect("noon").and_utc());
    events.extend(pages.into_iter().map(|page| DeviceEvent {
        device_id: device.to_string(),
        event: PageviewEvent {
            page,
            timestamp,
            country,
        },
    }));
    // Stable: injected views land after existing same-second events.
    let order: HashMap<String, usize> = {
        let mut m = HashMap::new();
        for e in &events {
            let n = m.len();
            m.entry(e.device_id.clone()).or_insert(n);
        }
        m
    };
    events.sort_by_key(|e| (order[&e.device_id], e.event.timestamp));
    Ok(events)
}

/// Worst-case input: `n_extra_views` more views of one page for one device-day.
pub fn heavy_user_injection(
    events: Vec<DeviceEvent>,
    device: &str,
    n_extra_views: usize,
    page: &PageRef,
    date: NaiveDate,
) -> Result<Vec<DeviceEvent>, SynthError> {
    inject_views(
        events,
        device,
        date,
        std::iter::repeat_n(page.clone(), n_extra_views),
    )
}

impl Workload {
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir).map_err(|e| DataError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        dataio::write_device_events(&self.events, &dir.join(EVENTS_FILE))?;
        dataio::write_global_daily(&self.global_daily, &dir.join(GLOBAL_DAILY_FILE))?;
        dataio::write_hourly(&self.hourly, &dir.join(HOURLY_FILE))?;
        dataio::write_country_list(&self.countries, &dir.join(COUNTRIES_FILE))?;
        Ok(())
    }
}
