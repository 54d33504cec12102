//! Parameter sweeps over a fixed dataset.
//!
//! Every grid cell is released `replications` times. Replication `r` uses the
//! same noise seed in every cell, so cells differing only in τ see identical
//! noise and their releases are nested.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::client_filter::{self, FilterError};
use crate::config::{self, ConfigError, KvMap};
use crate::dataio::{
    self, AnnotatedPageview, CountryCode, DataError, GlobalDailyRow, HourlyAggregateRow, PageviewEvent,
};
use crate::metrics::{self, MetricsError, TrueBaseline, UtilityReport};
use crate::noise::replication_seed;
use crate::release_current;
use crate::release_historical::{self, era_of, Era};
use crate::synth;
use crate::ReleaseError;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("sweep table is empty")]
    EmptyTable,
    #[error("sweep regime does not match the loaded data")]
    DataMismatch,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Release(#[from] ReleaseError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cell {cell} ({params}): {source}")]
    Cell {
        cell: usize,
        params: String,
        source: Box<TunerError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Current { date: NaiveDate },
    Historical { from: NaiveDate, to: NaiveDate },
}

impl Regime {
    pub fn era(&self) -> Result<Era, ReleaseError> {
        match *self {
            Regime::Current { .. } => Ok(Era::Current),
            Regime::Historical { from, .. } => era_of(from),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub regime: Regime,
    /// Fixed parameter values; era defaults fill the rest.
    pub base: KvMap,
    /// Parameter grids in product order: the last grid varies fastest.
    pub grids: Vec<(String, Vec<String>)>,
    pub replications: u32,
    pub seed: u64,
    /// Threshold for the "true count above threshold" drop rate.
    pub eval_threshold: i64,
}

const SPEC_KEYS: [&str; 7] = [
    "regime",
    "date",
    "from",
    "to",
    "replications",
    "seed",
    "eval_threshold",
];

impl SweepSpec {
    /// Reads the flat form: `regime`, `date` or `from`/`to`, `replications`,
    /// `seed`, `eval_threshold`, fixed parameters by name and grids as
    /// `grid.<param>=v1,v2,...`. Grids are ordered by parameter name.
    pub fn from_kv(kv: &KvMap) -> Result<Self, TunerError> {
        let regime = match kv.get("regime") {
            Some("current") => Regime::Current {
                date: kv
                    .date_opt("date")?
                    .ok_or_else(|| ConfigError::Missing("date".into()))?,
            },
            Some("historical") => Regime::Historical {
                from: kv
                    .date_opt("from")?
                    .ok_or_else(|| ConfigError::Missing("from".into()))?,
                to: kv
                    .date_opt("to")?
                    .ok_or_else(|| ConfigError::Missing("to".into()))?,
            },
            Some(other) => return Err(TunerError::InvalidSpec(format!("unknown regime {other:?}"))),
            None => return Err(ConfigError::Missing("regime".into()).into()),
        };
        let era = regime.era()?;
        let params: Vec<&str> = config::allowed_keys(era)
            .iter()
            .copied()
            .filter(|k| *k != "seed")
            .collect();

        let mut base = KvMap::new();
        let mut grids = Vec::new();
        for (key, value) in kv.iter() {
            if let Some(param) = key.strip_prefix("grid.") {
                if !params.contains(&param) {
                    return Err(ConfigError::UnknownKey(key.to_string()).into());
                }
                let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
                if values.iter().any(String::is_empty) {
                    return Err(TunerError::InvalidSpec(format!("empty value in {key}")));
                }
                grids.push((param.to_string(), values));
            } else if params.contains(&key) {
                base.insert(key, value);
            } else if !SPEC_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()).into());
            }
        }
        let spec = SweepSpec {
            regime,
            base,
            grids,
            replications: kv.parse_or("replications", 1u32)?,
            seed: kv.parse_or("seed", 0u64)?,
            eval_threshold: kv.parse_or("eval_threshold", 0i64)?,
        };
        if spec.replications == 0 {
            return Err(TunerError::InvalidSpec("replications must be positive".into()));
        }
        // Surface type errors before any work is done.
        for cell in spec.cells() {
            config::resolve(era, &spec.base, &cell)?;
        }
        Ok(spec)
    }

    /// Grid cells in product order, each as parameter overrides.
    pub fn cells(&self) -> Vec<KvMap> {
        let mut cells = vec![KvMap::new()];
        for (param, values) in &self.grids {
            cells = cells
                .iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut next = c.clone();
                        next.insert(param.clone(), v);
                        next
                    })
                })
                .collect();
        }
        cells
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.grids.iter().map(|(p, _)| p.as_str()).collect()
    }
}

/// Inputs for a sweep. Current-era data keeps device structure so the
/// filter can be re-run for each k.
#[derive(Debug, Clone)]
pub enum SweepData {
    Current {
        devices: Vec<(String, Vec<PageviewEvent>)>,
        global_daily: Vec<GlobalDailyRow>,
        countries: BTreeSet<CountryCode>,
    },
    Historical {
        hourly: Vec<HourlyAggregateRow>,
        global_daily: Vec<GlobalDailyRow>,
        countries: BTreeSet<CountryCode>,
    },
}

/// Loads the files written by [`synth::Workload::write_to`].
pub fn load_data(dir: &Path, regime: &Regime) -> Result<SweepData, TunerError> {
    let global_daily = dataio::read_global_daily(&dir.join(synth::GLOBAL_DAILY_FILE))?;
    let countries = dataio::read_country_list(&dir.join(synth::COUNTRIES_FILE))?;
    Ok(match regime {
        Regime::Current { .. } => SweepData::Current {
            devices: client_filter::group_by_device(dataio::read_device_events(
                &dir.join(synth::EVENTS_FILE),
            )?),
            global_daily,
            countries,
        },
        Regime::Historical { .. } => SweepData::Historical {
            hourly: dataio::read_hourly(&dir.join(synth::HOURLY_FILE))?,
            global_daily,
            countries,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub params: Vec<(String, String)>,
    pub replication: u32,
    pub released: usize,
    pub report: UtilityReport,
}

/// Runs the sweep; rows are ordered by cell, then replication. A failing
/// cell aborts the sweep and is named in the error.
pub fn sweep(spec: &SweepSpec, data: &SweepData) -> Result<Vec<SweepRow>, TunerError> {
    let baseline = match (data, &spec.regime) {
        (SweepData::Current { devices, .. }, Regime::Current { date }) => {
            TrueBaseline::from_events(devices.iter().flat_map(|(_, e)| e.iter())).restrict_dates(*date, *date)
        }
        (SweepData::Historical { hourly, .. }, Regime::Historical { from, to }) => {
            TrueBaseline::from_hourly(hourly).restrict_dates(*from, *to)
        }
        _ => return Err(TunerError::DataMismatch),
    };
    let mut run = CellRunner {
        spec,
        data,
        era: spec.regime.era()?,
        baseline,
        filtered: HashMap::new(),
    };
    let names = spec.param_names();
    let mut rows = Vec::new();
    for (cell, overrides) in spec.cells().into_iter().enumerate() {
        let params: Vec<(String, String)> = names
            .iter()
            .map(|n| (n.to_string(), overrides.get(n).unwrap_or_default().to_string()))
            .collect();
        for replication in 0..spec.replications {
            let (released, report) =
                run.replication(&overrides, replication)
                    .map_err(|e| TunerError::Cell {
                        cell,
                        params: overrides
                            .iter()
                            .map(|(k, v)| format!("{k}={v}"))
                            .collect::<Vec<_>>()
                            .join(","),
                        source: Box::new(e),
                    })?;
            rows.push(SweepRow {
                cell,
                params: params.clone(),
                replication,
                released,
                report,
            });
        }
    }
    Ok(rows)
}

struct CellRunner<'a> {
    spec: &'a SweepSpec,
    data: &'a SweepData,
    era: Era,
    baseline: TrueBaseline,
    /// Filter output per k; the salt seed is fixed across the sweep.
    filtered: HashMap<u64, Vec<AnnotatedPageview>>,
}

impl CellRunner<'_> {
    fn replication(
        &mut self,
        overrides: &KvMap,
        replication: u32,
    ) -> Result<(usize, UtilityReport), TunerError> {
        let resolved = config::resolve(self.era, &self.spec.base, overrides)?;
        let seed = replication_seed(self.spec.seed, replication);
        let output = match (self.data, &self.spec.regime) {
            (
                SweepData::Current {
                    devices,
                    global_daily,
                    countries,
                },
                Regime::Current { date },
            ) => {
                let mut cfg = resolved.current(*date, countries.clone())?;
                cfg.seed = seed;
                let k = cfg.k;
                if !self.filtered.contains_key(&k) {
                    let cap =
                        usize::try_from(k).map_err(|_| TunerError::InvalidSpec("k too large".into()))?;
                    self.filtered
                        .insert(k, client_filter::filter_stream(devices, cap, self.spec.seed)?);
                }
                release_current::release(&cfg, &self.filtered[&k], global_daily)?
            }
            (
                SweepData::Historical {
                    hourly,
                    global_daily,
                    countries,
                },
                Regime::Historical { from, to },
            ) => {
                let mut cfg = resolved.historical(*from, *to, countries.clone())?;
                cfg.seed = seed;
                release_historical::release(&cfg, hourly, global_daily)?
            }
            _ => return Err(TunerError::DataMismatch),
        };
        let report = metrics::evaluate(&output.rows, &self.baseline, self.spec.eval_threshold)?;
        Ok((output.rows.len(), report))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: usize,
    pub params: Vec<(String, String)>,
    pub replications: usize,
    pub metrics: Vec<(&'static str, MetricSummary)>,
}

fn summarized_values(row: &SweepRow) -> [(&'static str, f64); 7] {
    let r = &row.report;
    [
        ("released", row.released as f64),
        ("re_under_10", r.re_under_10),
        ("re_under_25", r.re_under_25),
        ("re_under_50", r.re_under_50),
        ("drop_rate_above_threshold", r.drop_rate_above_threshold),
        ("top1000_drop_rate", r.top1000_drop_rate),
        ("spurious_rate", r.spurious_rate),
    ]
}

/// Mean, min and max of each metric across replications of a cell.
pub fn summarize(table: &[SweepRow]) -> Result<Vec<CellSummary>, TunerError> {
    if table.is_empty() {
        return Err(TunerError::EmptyTable);
    }
    let mut out: Vec<CellSummary> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for row in table {
        let values = summarized_values(row);
        let fresh = out.last().is_none_or(|c| c.cell != row.cell);
        if fresh {
            out.push(CellSummary {
                cell: row.cell,
                params: row.params.clone(),
                replications: 0,
                metrics: values
                    .iter()
                    .map(|&(n, v)| {
                        (
                            n,
                            MetricSummary {
                                mean: 0.0,
                                min: v,
                                max: v,
                            },
                        )
                    })
                    .collect(),
            });
            sums.push(vec![0.0; values.len()]);
        }
        let cell = out.last_mut().expect("pushed above");
        let sum = sums.last_mut().expect("pushed above");
        cell.replications += 1;
        for (i, &(_, v)) in values.iter().enumerate() {
            sum[i] += v;
            let m = &mut cell.metrics[i].1;
            m.min = m.min.min(v);
            m.max = m.max.max(v);
        }
    }
    for (cell, sum) in out.iter_mut().zip(sums) {
        for (m, s) in cell.metrics.iter_mut().zip(sum) {
            m.1.mean = s / cell.replications as f64;
        }
    }
    Ok(out)
}

pub fn render_table(table: &[SweepRow], param_names: &[&str]) -> String {
    let mut out = String::from("cell");
    for p in param_names {
        let _ = write!(out, "\t{p}");
    }
    out.push_str("\treplication\treleased");
    let fields = UtilityReport::default().fields();
    for (name, _) in &fields {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    for row in table {
        let _ = write!(out, "{}", row.cell);
        for (_, v) in &row.params {
            let _ = write!(out, "\t{v}");
        }
        let _ = write!(out, "\t{}\t{}", row.replication, row.released);
        for (_, v) in row.report.fields() {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn render_summary(summary: &[CellSummary], param_names: &[&str]) -> String {
    let mut out = String::from("cell");
    for p in param_names {
        let _ = write!(out, "\t{p}");
    }
    out.push_str("\treplications");
    if let Some(first) = summary.first() {
        for (name, _) in &first.metrics {
            let _ = write!(out, "\t{name}_mean\t{name}_min\t{name}_max");
        }
    }
    out.push('\n');
    for cell in summary {
        let _ = write!(out, "{}", cell.cell);
        for (_, v) in &cell.params {
            let _ = write!(out, "\t{v}");
        }
        let _ = write!(out, "\t{}", cell.replications);
        for (_, m) in &cell.metrics {
            let _ = write!(out, "\t{:.6}\t{:.6}\t{:.6}", m.mean, m.min, m.max);
        }
        out.push('\n');
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    dataio::write_atomic(path, |w| w.write_all(text.as_bytes()))
}

pub fn write_table(table: &[SweepRow], param_names: &[&str], path: &Path) -> Result<(), DataError> {
    write_text(path, &render_table(table, param_names))
}

pub fn write_summary(summary: &[CellSummary], param_names: &[&str], path: &Path) -> Result<(), DataError> {
    write_text(path, &render_summary(summary, param_names))
}
