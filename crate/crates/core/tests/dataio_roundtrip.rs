use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use pvdp_core::dataio::{self, DataError};
use pvdp_core::{
    CountryCode, GlobalDailyRow, GroupKey, HourlyAggregateRow, PageRef, PageviewEvent, ReleaseRow,
};

fn country() -> impl Strategy<Value = CountryCode> {
    "[A-Z]{2}".prop_map(|s| s.parse().unwrap())
}

fn page() -> impl Strategy<Value = PageRef> {
    ("[a-z]{1,6}(\\.[a-z]{1,8})?", any::<u64>()).prop_map(|(p, id)| PageRef::new(&p, id).unwrap())
}

fn timestamp() -> impl Strategy<Value = DateTime<Utc>> {
    (1_400_000_000i64..1_900_000_000).prop_map(|s| Utc.timestamp_opt(s, 0).unwrap())
}

fn date() -> impl Strategy<Value = NaiveDate> {
    (0u64..4000).prop_map(|d| NaiveDate::from_ymd_opt(2015, 7, 1).unwrap() + chrono::Days::new(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn events_round_trip(rows in prop::collection::vec((page(), timestamp(), country()), 0..40)) {
        let rows: Vec<PageviewEvent> = rows
            .into_iter()
            .map(|(page, timestamp, country)| PageviewEvent { page, timestamp, country })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.tsv");
        dataio::write_events(&rows, &path).unwrap();
        prop_assert_eq!(dataio::read_events(&path).unwrap(), rows);
    }

    #[test]
    fn hourly_round_trip(rows in prop::collection::vec((page(), timestamp(), country(), 0i64..1_000_000), 0..40)) {
        let rows: Vec<HourlyAggregateRow> = rows
            .into_iter()
            .map(|(page, ts, country, count)| HourlyAggregateRow {
                page,
                hour: Utc.timestamp_opt(ts.timestamp() - ts.timestamp().rem_euclid(3600), 0).unwrap(),
                country,
                count,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hourly.tsv");
        dataio::write_hourly(&rows, &path).unwrap();
        prop_assert_eq!(dataio::read_hourly(&path).unwrap(), rows);
    }

    #[test]
    fn global_daily_round_trip(rows in prop::collection::vec((page(), date(), 0i64..1_000_000), 0..40)) {
        let rows: Vec<GlobalDailyRow> = rows
            .into_iter()
            .map(|(page, date, count)| GlobalDailyRow { page, date, count })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("daily.tsv");
        dataio::write_global_daily(&rows, &path).unwrap();
        prop_assert_eq!(dataio::read_global_daily(&path).unwrap(), rows);
    }

    #[test]
    fn release_round_trip(rows in prop::collection::btree_map((page(), date(), country()), -500i64..1_000_000, 0..40)) {
        let rows: Vec<ReleaseRow> = rows
            .into_iter()
            .map(|((p, d, c), count)| ReleaseRow { key: GroupKey::new(&p, d, c), count })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("release.tsv");
        dataio::write_release(&rows, &path).unwrap();
        prop_assert_eq!(dataio::read_release(&path).unwrap(), rows);
    }
}

#[test]
fn unsorted_release_rejected() {
    let p = PageRef::new("en.wikipedia", 1).unwrap();
    let d = NaiveDate::from_ymd_opt(2023, 4, 2).unwrap();
    let rows = vec![
        ReleaseRow {
            key: GroupKey::new(&p, d, "FR".parse().unwrap()),
            count: 100,
        },
        ReleaseRow {
            key: GroupKey::new(&p, d, "CH".parse().unwrap()),
            count: 100,
        },
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("release.tsv");
    assert!(matches!(
        dataio::write_release(&rows, &path),
        Err(DataError::UnsortedInput { index: 1 })
    ));
    assert!(!path.exists());
}

#[test]
fn missing_file() {
    assert!(matches!(
        dataio::read_events(std::path::Path::new("/nonexistent/events.tsv")),
        Err(DataError::MissingFile { .. })
    ));
}
