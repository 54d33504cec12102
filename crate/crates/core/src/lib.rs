//! Differentially private release of per-country pageview counts.
//!
//! Two release paths share group enumeration, keyed noise and suppression:
//! [`release_current`] consumes client-filtered pageviews and adds discrete
//! Gaussian noise; [`release_historical`] consumes hourly aggregates and adds
//! two-sided geometric noise. [`metrics`], [`synth`] and [`tuner`] support
//! utility evaluation on synthetic data.

pub mod accounting;
pub mod client_filter;
pub mod config;
pub mod dataio;
pub mod groups;
pub mod metadata;
pub mod metrics;
pub mod noise;
pub mod release_current;
pub mod release_historical;
pub mod synth;
pub mod tuner;

use chrono::NaiveDate;
use thiserror::Error;

pub use accounting::{AccountingError, PrivacyParams, Sensitivity};
pub use client_filter::{filter_stream, DeviceDayState, FilterError};
pub use config::{ConfigError, KvMap, ResolvedConfig};
pub use dataio::{
    AnnotatedPageview, CountryCode, DataError, DeviceEvent, GlobalDailyRow, GroupKey, HourlyAggregateRow,
    PageRef, PageviewEvent, Project, ReleaseRow,
};
pub use groups::{ReleaseOutput, ReleaseStats};
pub use metadata::RunMetadata;
pub use metrics::{TrueBaseline, UtilityReport};
pub use noise::{NoiseError, NoiseKind, NoiseSpec, RngStream, Sampler};
pub use release_current::CurrentRunConfig;
pub use release_historical::{Era, HistoricalRunConfig};
pub use synth::{Workload, WorkloadSpec};
pub use tuner::{SweepRow, SweepSpec};

#[derive(Debug, Error)]
pub enum ReleaseError {
    #[error("global daily row dated {found}, expected {expected}")]
    DateMismatch { expected: NaiveDate, found: NaiveDate },
    #[error("{date} belongs to era {}, run configured for {}", found.name(), expected.name())]
    EraMismatch {
        date: NaiveDate,
        expected: Era,
        found: Era,
    },
    #[error("{0} precedes the first date with data")]
    DateBeforeDataExists(NaiveDate),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}
