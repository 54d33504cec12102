//! Error classification for the exit-code contract: 1 for bad input data,
//! 2 for bad configuration.

use std::fmt;

use pvdp_core::metrics::MetricsError;
use pvdp_core::synth::SynthError;
use pvdp_core::tuner::TunerError;
use pvdp_core::{ConfigError, DataError, FilterError, ReleaseError};

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Config(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Config(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Config(m) => f.write_str(m),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<FilterError> for Failure {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::OutOfOrderEvent { .. } => Failure::Input(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ReleaseError> for Failure {
    fn from(e: ReleaseError) -> Self {
        match e {
            ReleaseError::DateMismatch { .. } => Failure::Input(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Data(d) => d.into(),
            SynthError::UnknownDevice(_) => Failure::Input(e.to_string()),
            SynthError::InvalidSpec(_) | SynthError::Config(_) => Failure::Config(e.to_string()),
        }
    }
}

impl From<TunerError> for Failure {
    fn from(e: TunerError) -> Self {
        match e {
            TunerError::Data(d) => d.into(),
            TunerError::Filter(f) => f.into(),
            TunerError::Release(r) => r.into(),
            TunerError::Metrics(m) => m.into(),
            TunerError::EmptyTable | TunerError::DataMismatch => Failure::Input(e.to_string()),
            TunerError::InvalidSpec(_) | TunerError::Config(_) => Failure::Config(e.to_string()),
            TunerError::Cell { .. } => {
                let text = e.to_string();
                let TunerError::Cell { source, .. } = e else {
                    unreachable!()
                };
                match Failure::from(*source) {
                    Failure::Input(_) => Failure::Input(text),
                    Failure::Config(_) => Failure::Config(text),
                }
            }
        }
    }
}
