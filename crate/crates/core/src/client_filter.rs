//! Client-side contribution bounding.
//!
//! Each device keeps, per UTC day, a set of salted 64-bit digests of the pages
//! it has already counted. A pageview is flagged for inclusion iff the set is
//! below capacity `k` and the page's digest is not yet in it. The salt is
//! redrawn at every day rollover together with the set reset, so the state
//! never holds a raw page identity and digests do not link across days.
//!
//! A digest collision makes a new page look already seen; it can only turn
//! an inclusion into an exclusion.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hasher;

use chrono::{DateTime, NaiveDate, Utc};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use siphasher::sip::SipHasher24;
use thiserror::Error;

use crate::dataio::{AnnotatedPageview, DeviceEvent, PageRef, PageviewEvent};
use crate::noise::RngStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("capacity k must be at least 1")]
    InvalidCapacity,
    #[error("{}event at {found} precedes previous event at {previous}", device.as_ref().map(|d| format!("device {d}: ")).unwrap_or_default())]
    OutOfOrderEvent {
        device: Option<String>,
        previous: DateTime<Utc>,
        found: DateTime<Utc>,
    },
}

/// Per-device filtering state for the current day.
#[derive(Debug, Clone)]
pub struct DeviceDayState {
    salt: u128,
    seen_hashes: BTreeSet<u64>,
    capacity: usize,
    current_day: Option<NaiveDate>,
    last_seen: Option<DateTime<Utc>>,
    salt_source: ChaCha20Rng,
}

impl DeviceDayState {
    /// Fresh state with capacity `k`; salts are drawn from `salt_stream`.
    pub fn new(k: usize, salt_stream: RngStream) -> Result<Self, FilterError> {
        if k == 0 {
            return Err(FilterError::InvalidCapacity);
        }
        let mut salt_source = salt_stream.rng();
        Ok(DeviceDayState {
            salt: salt_source.random(),
            seen_hashes: BTreeSet::new(),
            capacity: k,
            current_day: None,
            last_seen: None,
            salt_source,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn current_day(&self) -> Option<NaiveDate> {
        self.current_day
    }

    pub fn seen_count(&self) -> usize {
        self.seen_hashes.len()
    }

    fn digest(&self, page: &PageRef) -> u64 {
        let mut h = SipHasher24::new_with_key(&self.salt.to_le_bytes());
        h.write(page.project.as_str().as_bytes());
        h.write_u8(0xff);
        h.write_u64(page.page_id);
        h.finish()
    }

    fn roll_to(&mut self, day: NaiveDate) {
        if self.current_day != Some(day) {
            // The very first day keeps the salt drawn at construction.
            if self.current_day.is_some() {
                self.salt = self.salt_source.random();
            }
            self.seen_hashes.clear();
            self.current_day = Some(day);
        }
    }

    /// Flags one pageview; the event is passed through unchanged.
    pub fn annotate(&mut self, event: PageviewEvent) -> Result<AnnotatedPageview, FilterError> {
        if let Some(prev) = self.last_seen {
            if event.timestamp < prev {
                return Err(FilterError::OutOfOrderEvent {
                    device: None,
                    previous: prev,
                    found: event.timestamp,
                });
            }
        }
        self.last_seen = Some(event.timestamp);
        self.roll_to(event.date());

        let h = self.digest(&event.page);
        let include = self.seen_hashes.len() < self.capacity && !self.seen_hashes.contains(&h);
        if include {
            self.seen_hashes.insert(h);
        }
        Ok(AnnotatedPageview { event, include })
    }
}

/// Groups device-tagged events by device, keeping devices in order of first
/// appearance and each device's events in file order.
pub fn group_by_device(events: Vec<DeviceEvent>) -> Vec<(String, Vec<PageviewEvent>)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<(String, Vec<PageviewEvent>)> = Vec::new();
    for DeviceEvent { device_id, event } in events {
        match index.get(&device_id) {
            Some(&i) => out[i].1.push(event),
            None => {
                index.insert(device_id.clone(), out.len());
                out.push((device_id, vec![event]));
            }
        }
    }
    out
}

/// Runs the filter independently on each device and concatenates the
/// results. Device ids stop here.
pub fn filter_stream(
    devices: &[(String, Vec<PageviewEvent>)],
    k: usize,
    seed: u64,
) -> Result<Vec<AnnotatedPageview>, FilterError> {
    let mut out = Vec::with_capacity(devices.iter().map(|(_, e)| e.len()).sum());
    for (device, events) in devices {
        let stream = RngStream::new(seed, RngStream::stream_id(device.as_bytes()));
        let mut state = DeviceDayState::new(k, stream)?;
        for e in events {
            let annotated = state.annotate(e.clone()).map_err(|err| match err {
                FilterError::OutOfOrderEvent { previous, found, .. } => FilterError::OutOfOrderEvent {
                    device: Some(device.clone()),
                    previous,
                    found,
                },
                other => other,
            })?;
            out.push(annotated);
        }
    }
    Ok(out)
}
