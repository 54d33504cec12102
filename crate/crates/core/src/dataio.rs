//! Tab-separated interchange formats for every pipeline input and output.
//!
//! Every file has exactly one header line, `\n` line endings and no quoting.
//! Readers validate every row and abort on the first malformed line, reporting
//! the file and its 1-based line number. Writers go through a temporary file in
//! the destination directory and rename it into place, so an output path never
//! holds a partially written file.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike, Utc};
use thiserror::Error;

pub const EVENTS_HEADER: &str = "project\tpage_id\ttimestamp\tcountry";
pub const DEVICE_EVENTS_HEADER: &str = "device_id\tproject\tpage_id\ttimestamp\tcountry";
pub const ANNOTATED_HEADER: &str = "project\tpage_id\ttimestamp\tcountry\tinclude";
pub const HOURLY_HEADER: &str = "project\tpage_id\thour\tcountry\tcount";
pub const GLOBAL_DAILY_HEADER: &str = "project\tpage_id\tdate\tcount";
pub const COUNTRIES_HEADER: &str = "country";
pub const RELEASE_HEADER: &str = "project\tpage_id\tdate\tcountry\tcount";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
const HOUR_FORMAT: &str = "%Y-%m-%dT%H:%M";
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: file not found", path.display())]
    MissingFile { path: PathBuf },
    #[error("{}:{line}: schema mismatch: {reason}", path.display())]
    SchemaMismatch {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}:{line}: bad country code {value:?}", path.display())]
    BadCountryCode {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("{}:{line}: bad timestamp {value:?}", path.display())]
    BadTimestamp {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("rows are not sorted by group key (row {index} precedes its predecessor)")]
    UnsortedInput { index: usize },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl DataError {
    fn io(path: &Path, source: io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Field-level parse failure, located by the reader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldError {
    Schema(String),
    Country(String),
    Timestamp(String),
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::Schema(r) => write!(f, "{r}"),
            FieldError::Country(v) => write!(f, "bad country code {v:?}"),
            FieldError::Timestamp(v) => write!(f, "bad timestamp {v:?}"),
        }
    }
}

impl FieldError {
    fn at(self, path: &Path, line: usize) -> DataError {
        let path = path.to_path_buf();
        match self {
            FieldError::Schema(reason) => DataError::SchemaMismatch { path, line, reason },
            FieldError::Country(value) => DataError::BadCountryCode { path, line, value },
            FieldError::Timestamp(value) => DataError::BadTimestamp { path, line, value },
        }
    }
}

/// ISO 3166-1 alpha-2 code: exactly two uppercase ASCII letters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn as_str(&self) -> &str {
        // Both bytes are ASCII uppercase by construction.
        std::str::from_utf8(&self.0).expect("ascii")
    }
}

impl FromStr for CountryCode {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.as_bytes() {
            [a, b] if a.is_ascii_uppercase() && b.is_ascii_uppercase() => Ok(CountryCode([*a, *b])),
            _ => Err(FieldError::Country(s.to_string())),
        }
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// Wiki project token such as `en.wikipedia`. Non-empty, no whitespace.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Project(String);

impl Project {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Project {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            return Err(FieldError::Schema(format!("bad project token {s:?}")));
        }
        Ok(Project(s.to_string()))
    }
}

impl fmt::Display for Project {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Project {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A page: page ids are only unique within a project, so both always travel together.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PageRef {
    pub project: Project,
    pub page_id: u64,
}

impl PageRef {
    pub fn new(project: &str, page_id: u64) -> Result<Self, FieldError> {
        Ok(PageRef {
            project: project.parse()?,
            page_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageviewEvent {
    pub page: PageRef,
    pub timestamp: DateTime<Utc>,
    pub country: CountryCode,
}

impl PageviewEvent {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedPageview {
    pub event: PageviewEvent,
    pub include: bool,
}

/// A pageview that still carries the originating device. Only the synthetic
/// generator and the client-side filter driver ever see these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceEvent {
    pub device_id: String,
    pub event: PageviewEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourlyAggregateRow {
    pub page: PageRef,
    pub hour: DateTime<Utc>,
    pub country: CountryCode,
    pub count: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDailyRow {
    pub page: PageRef,
    pub date: NaiveDate,
    pub count: i64,
}

/// Identity of one released cell. Field order gives the total order
/// `(project, page_id, date, country)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub project: Project,
    pub page_id: u64,
    pub date: NaiveDate,
    pub country: CountryCode,
}

impl GroupKey {
    pub fn new(page: &PageRef, date: NaiveDate, country: CountryCode) -> Self {
        GroupKey {
            project: page.project.clone(),
            page_id: page.page_id,
            date,
            country,
        }
    }

    pub fn page(&self) -> PageRef {
        PageRef {
            project: self.project.clone(),
            page_id: self.page_id,
        }
    }

    /// Canonical byte encoding, the same as the key columns of a release row.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        format!(
            "{}\t{}\t{}\t{}",
            self.project,
            self.page_id,
            format_date(self.date),
            self.country
        )
        .into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReleaseRow {
    pub key: GroupKey,
    pub count: i64,
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn format_hour(ts: &DateTime<Utc>) -> String {
    ts.format(HOUR_FORMAT).to_string()
}

pub fn format_date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, FieldError> {
    // chrono accepts some non-canonical spellings (e.g. single-digit fields);
    // requiring the formatted form back guarantees a lossless round trip.
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .ok()
        .map(|t| t.and_utc())
        .filter(|t| format_timestamp(t) == s)
        .ok_or_else(|| FieldError::Timestamp(s.to_string()))
}

pub fn parse_hour(s: &str) -> Result<DateTime<Utc>, FieldError> {
    NaiveDateTime::parse_from_str(s, HOUR_FORMAT)
        .ok()
        .map(|t| t.and_utc())
        .filter(|t| t.minute() == 0 && t.second() == 0 && format_hour(t) == s)
        .ok_or_else(|| FieldError::Timestamp(s.to_string()))
}

pub fn parse_date(s: &str) -> Result<NaiveDate, FieldError> {
    NaiveDate::parse_from_str(s, DATE_FORMAT)
        .ok()
        .filter(|d| format_date(*d) == s)
        .ok_or_else(|| FieldError::Timestamp(s.to_string()))
}

fn parse_page_id(s: &str) -> Result<u64, FieldError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(FieldError::Schema(format!("bad page id {s:?}")));
    }
    s.parse()
        .map_err(|_| FieldError::Schema(format!("bad page id {s:?}")))
}

fn parse_count(s: &str) -> Result<i64, FieldError> {
    let bad = || FieldError::Schema(format!("bad count {s:?}"));
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    s.parse().map_err(|_| bad())
}

/// Signed counts appear only in release files.
fn parse_signed_count(s: &str) -> Result<i64, FieldError> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(FieldError::Schema(format!("bad count {s:?}")));
    }
    s.parse()
        .map_err(|_| FieldError::Schema(format!("bad count {s:?}")))
}

fn parse_flag(s: &str) -> Result<bool, FieldError> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(FieldError::Schema(format!("bad include flag {s:?}"))),
    }
}

fn split_fields<const N: usize>(line: &str) -> Result<[&str; N], FieldError> {
    let mut out = [""; N];
    let mut parts = line.split('\t');
    for slot in out.iter_mut() {
        *slot = parts
            .next()
            .ok_or_else(|| FieldError::Schema(format!("expected {N} columns")))?;
    }
    if parts.next().is_some() {
        return Err(FieldError::Schema(format!("expected {N} columns")));
    }
    Ok(out)
}

fn parse_event_fields(f: [&str; 4]) -> Result<PageviewEvent, FieldError> {
    Ok(PageviewEvent {
        page: PageRef {
            project: f[0].parse()?,
            page_id: parse_page_id(f[1])?,
        },
        timestamp: parse_timestamp(f[2])?,
        country: f[3].parse()?,
    })
}

pub fn parse_event_line(line: &str) -> Result<PageviewEvent, FieldError> {
    parse_event_fields(split_fields::<4>(line)?)
}

pub fn parse_device_event_line(line: &str) -> Result<DeviceEvent, FieldError> {
    let f = split_fields::<5>(line)?;
    if f[0].is_empty() || f[0].chars().any(char::is_whitespace) {
        return Err(FieldError::Schema(format!("bad device id {:?}", f[0])));
    }
    Ok(DeviceEvent {
        device_id: f[0].to_string(),
        event: parse_event_fields([f[1], f[2], f[3], f[4]])?,
    })
}

pub fn parse_annotated_line(line: &str) -> Result<AnnotatedPageview, FieldError> {
    let f = split_fields::<5>(line)?;
    Ok(AnnotatedPageview {
        event: parse_event_fields([f[0], f[1], f[2], f[3]])?,
        include: parse_flag(f[4])?,
    })
}

pub fn parse_hourly_line(line: &str) -> Result<HourlyAggregateRow, FieldError> {
    let f = split_fields::<5>(line)?;
    Ok(HourlyAggregateRow {
        page: PageRef {
            project: f[0].parse()?,
            page_id: parse_page_id(f[1])?,
        },
        hour: parse_hour(f[2])?,
        country: f[3].parse()?,
        count: parse_count(f[4])?,
    })
}

pub fn parse_global_daily_line(line: &str) -> Result<GlobalDailyRow, FieldError> {
    let f = split_fields::<4>(line)?;
    Ok(GlobalDailyRow {
        page: PageRef {
            project: f[0].parse()?,
            page_id: parse_page_id(f[1])?,
        },
        date: parse_date(f[2])?,
        count: parse_count(f[3])?,
    })
}

pub fn parse_release_line(line: &str) -> Result<ReleaseRow, FieldError> {
    let f = split_fields::<5>(line)?;
    Ok(ReleaseRow {
        key: GroupKey {
            project: f[0].parse()?,
            page_id: parse_page_id(f[1])?,
            date: parse_date(f[2])?,
            country: f[3].parse()?,
        },
        count: parse_signed_count(f[4])?,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path).map(BufReader::new).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            DataError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            DataError::io(path, e)
        }
    })
}

/// Reads a whole file, checking the header and parsing each data line.
pub fn read_rows<T>(
    path: &Path,
    header: &str,
    parse: impl Fn(&str) -> Result<T, FieldError>,
) -> Result<Vec<T>, DataError> {
    let reader = open(path)?;
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h == header => {}
        Some(Ok(h)) => {
            return Err(DataError::SchemaMismatch {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("expected header {header:?}, found {h:?}"),
            })
        }
        Some(Err(e)) => return Err(DataError::io(path, e)),
        None => {
            return Err(DataError::SchemaMismatch {
                path: path.to_path_buf(),
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        rows.push(parse(&line).map_err(|e| e.at(path, idx + 2))?);
    }
    Ok(rows)
}

/// Returns the header line of a file, for callers that accept several layouts.
pub fn read_header(path: &Path) -> Result<String, DataError> {
    let mut first = String::new();
    open(path)?
        .read_line(&mut first)
        .map_err(|e| DataError::io(path, e))?;
    Ok(first.trim_end_matches('\n').to_string())
}

pub fn read_events(path: &Path) -> Result<Vec<PageviewEvent>, DataError> {
    read_rows(path, EVENTS_HEADER, parse_event_line)
}

pub fn read_device_events(path: &Path) -> Result<Vec<DeviceEvent>, DataError> {
    read_rows(path, DEVICE_EVENTS_HEADER, parse_device_event_line)
}

pub fn read_annotated(path: &Path) -> Result<Vec<AnnotatedPageview>, DataError> {
    read_rows(path, ANNOTATED_HEADER, parse_annotated_line)
}

pub fn read_hourly(path: &Path) -> Result<Vec<HourlyAggregateRow>, DataError> {
    read_rows(path, HOURLY_HEADER, parse_hourly_line)
}

pub fn read_global_daily(path: &Path) -> Result<Vec<GlobalDailyRow>, DataError> {
    read_rows(path, GLOBAL_DAILY_HEADER, parse_global_daily_line)
}

pub fn read_country_list(path: &Path) -> Result<BTreeSet<CountryCode>, DataError> {
    let rows = read_rows(path, COUNTRIES_HEADER, |l| l.parse::<CountryCode>())?;
    Ok(rows.into_iter().collect())
}

pub fn read_release(path: &Path) -> Result<Vec<ReleaseRow>, DataError> {
    read_rows(path, RELEASE_HEADER, parse_release_line)
}

/// Writes `header` plus one line per row, atomically replacing `path`.
pub fn write_rows<T>(
    path: &Path,
    header: &str,
    rows: &[T],
    mut format_row: impl FnMut(&T, &mut dyn Write) -> io::Result<()>,
) -> Result<(), DataError> {
    write_atomic(path, |w| {
        writeln!(w, "{header}")?;
        for row in rows {
            format_row(row, w)?;
        }
        Ok(())
    })
}

/// Runs `body` against a temporary file next to `path`, then renames it into place.
pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), DataError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DataError::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| DataError::io(path, e))?;
        w.flush().map_err(|e| DataError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| DataError::io(path, e.error))?;
    Ok(())
}

pub fn write_release(rows: &[ReleaseRow], path: &Path) -> Result<(), DataError> {
    if let Some(i) = rows.windows(2).position(|w| w[0].key > w[1].key) {
        return Err(DataError::UnsortedInput { index: i + 1 });
    }
    write_rows(path, RELEASE_HEADER, rows, |r, w| {
        let k = &r.key;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            k.project,
            k.page_id,
            format_date(k.date),
            k.country,
            r.count
        )
    })
}

fn write_event(e: &PageviewEvent, w: &mut dyn Write) -> io::Result<()> {
    write!(
        w,
        "{}\t{}\t{}\t{}",
        e.page.project,
        e.page.page_id,
        format_timestamp(&e.timestamp),
        e.country
    )
}

pub fn write_events(rows: &[PageviewEvent], path: &Path) -> Result<(), DataError> {
    write_rows(path, EVENTS_HEADER, rows, |e, w| {
        write_event(e, w)?;
        writeln!(w)
    })
}

pub fn write_device_events(rows: &[DeviceEvent], path: &Path) -> Result<(), DataError> {
    write_rows(path, DEVICE_EVENTS_HEADER, rows, |e, w| {
        write!(w, "{}\t", e.device_id)?;
        write_event(&e.event, w)?;
        writeln!(w)
    })
}

pub fn write_annotated(rows: &[AnnotatedPageview], path: &Path) -> Result<(), DataError> {
    write_rows(path, ANNOTATED_HEADER, rows, |a, w| {
        write_event(&a.event, w)?;
        writeln!(w, "\t{}", a.include)
    })
}

pub fn write_hourly(rows: &[HourlyAggregateRow], path: &Path) -> Result<(), DataError> {
    write_rows(path, HOURLY_HEADER, rows, |r, w| {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            r.page.project,
            r.page.page_id,
            format_hour(&r.hour),
            r.country,
            r.count
        )
    })
}

pub fn write_global_daily(rows: &[GlobalDailyRow], path: &Path) -> Result<(), DataError> {
    write_rows(path, GLOBAL_DAILY_HEADER, rows, |r, w| {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            r.page.project,
            r.page.page_id,
            format_date(r.date),
            r.count
        )
    })
}

pub fn write_country_list(countries: &BTreeSet<CountryCode>, path: &Path) -> Result<(), DataError> {
    let rows: Vec<_> = countries.iter().collect();
    write_rows(path, COUNTRIES_HEADER, &rows, |c, w| writeln!(w, "{c}"))
}
