use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use pvdp_core::client_filter::{filter_stream, group_by_device};
use pvdp_core::groups::enumerate_groups;
use pvdp_core::release_current::count_included;
use pvdp_core::{DeviceEvent, GlobalDailyRow, PageRef, PageviewEvent};

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 4, 2).unwrap()
}

/// Events for one device: (day offset, second of day, page).
fn device_events(id: &str, raw: &[(u8, u32, u64)]) -> Vec<DeviceEvent> {
    let mut raw = raw.to_vec();
    raw.sort_by_key(|&(d, s, _)| (d, s));
    raw.into_iter()
        .map(|(d, s, p)| DeviceEvent {
            device_id: id.to_string(),
            event: PageviewEvent {
                page: PageRef::new("en.wikipedia", p).unwrap(),
                timestamp: Utc.from_utc_datetime(
                    &(day0() + chrono::Days::new(d as u64))
                        .and_hms_opt(0, 0, 0)
                        .unwrap(),
                ) + Duration::seconds(s as i64),
                country: "CH".parse().unwrap(),
            },
        })
        .collect()
}

fn raw_events() -> impl Strategy<Value = Vec<(u8, u32, u64)>> {
    prop::collection::vec((0u8..3, 0u32..86_400, 0u64..15), 0..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Included views are exactly the first k distinct pages of each day.
    #[test]
    fn first_k_distinct_per_day(raw in raw_events(), k in 1usize..12, seed in any::<u64>()) {
        let events = device_events("d1", &raw);
        let out = filter_stream(&group_by_device(events.clone()), k, seed).unwrap();
        prop_assert_eq!(out.len(), events.len());
        let mut seen: BTreeMap<NaiveDate, Vec<&PageRef>> = BTreeMap::new();
        for (e, a) in events.iter().zip(&out) {
            prop_assert_eq!(&e.event, &a.event);
            let day = seen.entry(e.event.date()).or_default();
            let expected = day.len() < k && !day.contains(&&e.event.page);
            if expected {
                day.push(&e.event.page);
            }
            prop_assert_eq!(a.include, expected);
        }
    }

    /// Removing one device changes the true group counts by at most k in L1
    /// and at most 1 per group, on every day.
    #[test]
    fn device_contribution_bounded(
        others in prop::collection::vec(raw_events(), 0..4),
        victim in raw_events(),
        k in 1usize..12,
    ) {
        let mut with = Vec::new();
        for (i, raw) in others.iter().enumerate() {
            with.extend(device_events(&format!("o{i}"), raw));
        }
        let without = with.clone();
        with.extend(device_events("victim", &victim));

        let countries: BTreeSet<_> = ["CH".parse().unwrap()].into_iter().collect();
        let mut groups = BTreeSet::new();
        for d in 0..3 {
            let date = day0() + chrono::Days::new(d);
            let daily: Vec<GlobalDailyRow> = (0..15)
                .map(|p| GlobalDailyRow { page: PageRef::new("en.wikipedia", p).unwrap(), date, count: 1000 })
                .collect();
            groups.extend(enumerate_groups(&daily, &countries, 150, date).unwrap());
        }
        let a = count_included(&filter_stream(&group_by_device(with), k, 1).unwrap(), &groups).table;
        let b = count_included(&filter_stream(&group_by_device(without), k, 1).unwrap(), &groups).table;
        let mut per_day: BTreeMap<NaiveDate, i64> = BTreeMap::new();
        for (key, ca) in &a {
            let diff = (ca - b[key]).abs();
            prop_assert!(diff <= 1);
            *per_day.entry(key.date).or_default() += diff;
        }
        prop_assert!(per_day.values().all(|&l1| l1 <= k as i64));
    }
}

#[test]
fn salts_differ_across_devices_and_days() {
    // Same page twice on one day is deduplicated; a new day resets the set.
    let raw = [(0, 10, 1), (0, 20, 1), (1, 5, 1)];
    let events = device_events("d1", &raw);
    let out = filter_stream(&group_by_device(events), 10, 3).unwrap();
    assert_eq!(
        out.iter().map(|a| a.include).collect::<Vec<_>>(),
        [true, false, true]
    );
}
