use std::collections::BTreeSet;
use std::path::Path;

use pvdp_core::config::{self, KvMap};
use pvdp_core::dataio::{self, ANNOTATED_HEADER, DEVICE_EVENTS_HEADER, EVENTS_HEADER};
use pvdp_core::metadata::RunMetadata;
use pvdp_core::metrics::{self, TrueBaseline};
use pvdp_core::release_historical::era_of;
use pvdp_core::synth::{self, WorkloadSpec};
use pvdp_core::tuner::{self, SweepSpec};
use pvdp_core::{client_filter, release_current, release_historical, Era, ReleaseError, ReleaseOutput};

use crate::failure::Failure;
use crate::{info, warn, CmdResult, CommonRelease, EvaluateArgs, ReleaseCurrentArgs, ReleaseHistoricalArgs};

fn read_config(common: &CommonRelease, meta: &mut RunMetadata) -> Result<KvMap, Failure> {
    match &common.config {
        Some(p) => {
            meta.input("config", p)?;
            Ok(KvMap::read(p)?)
        }
        None => Ok(KvMap::new()),
    }
}

fn common_flags(common: &CommonRelease) -> KvMap {
    let mut flags = KvMap::new();
    if let Some(t) = common.t {
        flags.insert("t", t);
    }
    if let Some(tau) = common.tau {
        flags.insert("tau", tau);
    }
    if let Some(seed) = common.seed {
        flags.insert("seed", seed);
    }
    flags
}

fn finish_release(out: &ReleaseOutput, path: &Path, mut meta: RunMetadata) -> CmdResult {
    dataio::write_release(&out.rows, path)?;
    meta.release_stats(&out.stats);
    meta.write(path)?;
    if out.stats.noise_scale.is_none() {
        warn("noise disabled: output is NOT private");
    }
    info(format!(
        "wrote {} rows to {} ({} groups, {} suppressed)",
        out.rows.len(),
        path.display(),
        out.stats.groups,
        out.stats.suppressed
    ));
    Ok(())
}

pub fn synth(spec_path: &Path, out_dir: &Path) -> CmdResult {
    let spec = WorkloadSpec::from_kv(&KvMap::read(spec_path)?)?;
    let workload = synth::generate(&spec)?;
    workload.write_to(out_dir)?;
    let mut meta = RunMetadata::new("synth");
    meta.input("spec", spec_path)?;
    meta.push("seed", spec.seed);
    meta.push("events", workload.events.len());
    meta.push("global_daily_rows", workload.global_daily.len());
    meta.push("hourly_rows", workload.hourly.len());
    meta.write(&out_dir.join("synth"))?;
    info(format!(
        "wrote {} events to {}",
        workload.events.len(),
        out_dir.display()
    ));
    Ok(())
}

pub fn filter(events: &Path, out: &Path, k: u64, seed: u64) -> CmdResult {
    let capacity = usize::try_from(k).map_err(|_| Failure::Config(format!("k={k} is too large")))?;
    let rows = dataio::read_device_events(events)?;
    let rows_in = rows.len();
    let devices = client_filter::group_by_device(rows);
    let annotated = client_filter::filter_stream(&devices, capacity, seed)?;
    dataio::write_annotated(&annotated, out)?;

    let mut meta = RunMetadata::new("filter");
    meta.input("events", events)?;
    meta.push("k", k);
    meta.push("seed", seed);
    meta.push("devices", devices.len());
    meta.push("rows_in", rows_in);
    meta.push("included", annotated.iter().filter(|a| a.include).count());
    meta.write(out)?;
    info(format!(
        "annotated {rows_in} events from {} devices",
        devices.len()
    ));
    Ok(())
}

pub fn release_current(a: &ReleaseCurrentArgs) -> CmdResult {
    let era = era_of(a.date)?;
    if era != Era::Current {
        return Err(ReleaseError::EraMismatch {
            date: a.date,
            expected: Era::Current,
            found: era,
        }
        .into());
    }
    let mut meta = RunMetadata::new("release-current");
    let file = read_config(&a.common, &mut meta)?;
    let mut flags = common_flags(&a.common);
    if let Some(k) = a.k {
        flags.insert("k", k);
    }
    if let Some(rho) = a.rho {
        flags.insert("rho", rho);
    }
    let resolved = config::resolve(Era::Current, &file, &flags)?;
    let countries = dataio::read_country_list(&a.common.countries)?;
    let mut cfg = resolved.current(a.date, countries)?;
    cfg.add_noise = !a.common.no_noise;
    cfg.validate()?;

    let events = dataio::read_annotated(&a.events)?;
    let daily = dataio::read_global_daily(&a.common.global_daily)?;
    let out = release_current::release(&cfg, &events, &daily)?;

    meta.input("events", &a.events)?;
    meta.input("global_daily", &a.common.global_daily)?;
    meta.input("countries", &a.common.countries)?;
    meta.push("era", era.name());
    meta.push("date", a.date);
    for (k, v) in resolved.pairs() {
        meta.push(k, v);
    }
    finish_release(&out, &a.common.out, meta)
}

pub fn release_historical(a: &ReleaseHistoricalArgs) -> CmdResult {
    let era = era_of(a.from)?;
    if era == Era::Current {
        return Err(ReleaseError::EraMismatch {
            date: a.from,
            expected: Era::Era2017To2023,
            found: era,
        }
        .into());
    }
    let mut meta = RunMetadata::new("release-historical");
    let file = read_config(&a.common, &mut meta)?;
    let mut flags = common_flags(&a.common);
    if let Some(m) = a.m {
        flags.insert("m", m);
    }
    if let Some(eps) = a.epsilon {
        flags.insert("epsilon", eps);
    }
    let resolved = config::resolve(era, &file, &flags)?;
    let countries = dataio::read_country_list(&a.common.countries)?;
    let mut cfg = resolved.historical(a.from, a.to, countries)?;
    cfg.add_noise = !a.common.no_noise;
    cfg.validate()?;

    let hourly = dataio::read_hourly(&a.hourly)?;
    let daily = dataio::read_global_daily(&a.common.global_daily)?;
    let out = release_historical::release(&cfg, &hourly, &daily)?;

    meta.input("hourly", &a.hourly)?;
    meta.input("global_daily", &a.common.global_daily)?;
    meta.input("countries", &a.common.countries)?;
    meta.push("era", era.name());
    meta.push("from", a.from);
    meta.push("to", a.to);
    for (k, v) in resolved.pairs() {
        meta.push(k, v);
    }
    finish_release(&out, &a.common.out, meta)
}

fn raw_baseline(path: &Path) -> Result<TrueBaseline, Failure> {
    let header = dataio::read_header(path)?;
    Ok(match header.as_str() {
        EVENTS_HEADER => TrueBaseline::from_events(&dataio::read_events(path)?),
        DEVICE_EVENTS_HEADER => {
            let rows = dataio::read_device_events(path)?;
            TrueBaseline::from_events(rows.iter().map(|d| &d.event))
        }
        ANNOTATED_HEADER => {
            let rows = dataio::read_annotated(path)?;
            TrueBaseline::from_events(rows.iter().map(|a| &a.event))
        }
        other => {
            return Err(Failure::Input(format!(
                "{}:1: unrecognized raw event header {other:?}",
                path.display()
            )))
        }
    })
}

pub fn evaluate(a: &EvaluateArgs) -> CmdResult {
    let release = dataio::read_release(&a.release)?;
    let mut meta = RunMetadata::new("evaluate");
    meta.input("release", &a.release)?;
    let baseline = match (&a.raw, &a.hourly) {
        (Some(raw), _) => {
            meta.input("raw", raw)?;
            raw_baseline(raw)?
        }
        (None, Some(hourly)) => {
            meta.input("hourly", hourly)?;
            TrueBaseline::from_hourly(&dataio::read_hourly(hourly)?)
        }
        (None, None) => return Err(Failure::Config("one of --raw or --hourly is required".into())),
    };
    let range = match (a.from, a.to) {
        (Some(f), Some(t)) => Some((f, t)),
        _ => {
            let dates: BTreeSet<_> = release.iter().map(|r| r.key.date).collect();
            dates.first().copied().zip(dates.last().copied())
        }
    };
    let baseline = match range {
        Some((f, t)) => {
            meta.push("from", f);
            meta.push("to", t);
            baseline.restrict_dates(f, t)
        }
        None => baseline,
    };
    let report = metrics::evaluate(&release, &baseline, a.threshold)?;
    meta.push("threshold", a.threshold);
    meta.push("release_rows", release.len());
    meta.push("true_groups", baseline.len());

    let fields = report.fields();
    let mut text = String::new();
    for (k, v) in &fields {
        text.push_str(&format!("{k}={v}\n"));
    }
    dataio::write_atomic(&a.out, |w| w.write_all(text.as_bytes()))?;
    if let Some(tsv) = &a.tsv {
        let names: Vec<_> = fields.iter().map(|(k, _)| *k).collect();
        let values: Vec<_> = fields.iter().map(|(_, v)| v.as_str()).collect();
        let body = format!("{}\n{}\n", names.join("\t"), values.join("\t"));
        dataio::write_atomic(tsv, |w| w.write_all(body.as_bytes()))?;
    }
    meta.write(&a.out)?;
    info(format!(
        "evaluated {} released rows against {} true groups",
        release.len(),
        baseline.len()
    ));
    Ok(())
}

pub fn sweep(spec_path: &Path, data_dir: &Path, out: &Path, summary: Option<&Path>) -> CmdResult {
    let spec = SweepSpec::from_kv(&KvMap::read(spec_path)?)?;
    let data = tuner::load_data(data_dir, &spec.regime)?;
    let table = tuner::sweep(&spec, &data)?;
    let names = spec.param_names();
    tuner::write_table(&table, &names, out)?;

    let mut meta = RunMetadata::new("sweep");
    meta.input("spec", spec_path)?;
    for (role, file) in [
        ("global_daily", synth::GLOBAL_DAILY_FILE),
        ("countries", synth::COUNTRIES_FILE),
        match spec.regime {
            tuner::Regime::Current { .. } => ("events", synth::EVENTS_FILE),
            tuner::Regime::Historical { .. } => ("hourly", synth::HOURLY_FILE),
        },
    ] {
        meta.input(role, &data_dir.join(file))?;
    }
    meta.push("seed", spec.seed);
    meta.push("cells", spec.cells().len());
    meta.push("replications", spec.replications);
    meta.push("rows_out", table.len());
    if let Some(path) = summary {
        let cells = tuner::summarize(&table)?;
        tuner::write_summary(&cells, &names, path)?;
    }
    meta.write(out)?;
    info(format!("wrote {} sweep rows to {}", table.len(), out.display()));
    Ok(())
}
