use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, Duration, NaiveDate};
use nalgebra::DMatrix;
use serde::Serialize;

use super::{GpsTable, IngestError, InjuryEvent};
use crate::data::Dataset;

/// Which subjects enter the weekly table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Approach {
    /// Only subjects with an intrinsic injury and at least two sessions
    /// before their first one.
    A,
    /// Every subject.
    B,
}

impl std::str::FromStr for Approach {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Approach::A),
            "B" | "b" => Ok(Approach::B),
            other => Err(format!("unknown approach {other:?}, expected A or B")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IsoWeek {
    pub year: i32,
    pub week: u32,
}

impl IsoWeek {
    pub fn of(date: NaiveDate) -> Self {
        let w = date.iso_week();
        Self {
            year: w.year(),
            week: w.week(),
        }
    }
}

impl fmt::Display for IsoWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.year, self.week)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeeklyRow {
    pub subject_id: String,
    pub week: IsoWeek,
    pub features: Vec<f64>,
    pub injured: bool,
}

/// Per-subject, per-ISO-week feature means. The first feature is the mean
/// session duration, followed by the GPS variables in table order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeeklyFrame {
    pub feature_names: Vec<String>,
    pub rows: Vec<WeeklyRow>,
}

impl WeeklyFrame {
    pub fn to_dataset(&self) -> Dataset {
        let x = DMatrix::from_fn(self.rows.len(), self.feature_names.len(), |i, j| {
            self.rows[i].features[j]
        });
        Dataset::new(
            self.feature_names.clone(),
            x,
            self.rows.iter().map(|r| r.injured).collect(),
        )
    }
}

/// Injury event days are counted from `season_start` (day 1).
pub fn aggregate_weekly(
    gps: &GpsTable,
    events: &[InjuryEvent],
    approach: Approach,
    season_start: NaiveDate,
) -> Result<WeeklyFrame, IngestError> {
    let event_date = |day: u32| season_start + Duration::days(i64::from(day) - 1);

    let mut injury_weeks: BTreeMap<&str, BTreeSet<IsoWeek>> = BTreeMap::new();
    let mut first_injury: BTreeMap<&str, NaiveDate> = BTreeMap::new();
    for e in events.iter().filter(|e| e.intrinsic) {
        let date = event_date(e.day);
        injury_weeks
            .entry(e.subject_id.as_str())
            .or_default()
            .insert(IsoWeek::of(date));
        first_injury
            .entry(e.subject_id.as_str())
            .and_modify(|d| *d = (*d).min(date))
            .or_insert(date);
    }

    let eligible = |subject: &str| -> bool {
        match approach {
            Approach::B => true,
            Approach::A => first_injury.get(subject).is_some_and(|&injury| {
                gps.sessions
                    .iter()
                    .filter(|s| s.subject_id == subject && s.date < injury)
                    .count()
                    >= 2
            }),
        }
    };

    let width = gps.feature_names.len() + 1;
    let mut sums: BTreeMap<(String, IsoWeek), (Vec<f64>, usize)> = BTreeMap::new();
    let mut verdict: BTreeMap<&str, bool> = BTreeMap::new();
    for s in &gps.sessions {
        let ok = *verdict
            .entry(s.subject_id.as_str())
            .or_insert_with(|| eligible(&s.subject_id));
        if !ok {
            continue;
        }
        let entry = sums
            .entry((s.subject_id.clone(), IsoWeek::of(s.date)))
            .or_insert_with(|| (vec![0.0; width], 0));
        entry.0[0] += s.duration_minutes;
        for (acc, v) in entry.0[1..].iter_mut().zip(&s.features) {
            *acc += v;
        }
        entry.1 += 1;
    }
    if sums.is_empty() {
        return Err(IngestError::EmptyWeekSet);
    }

    let rows = sums
        .into_iter()
        .map(|((subject_id, week), (total, count))| {
            let injured = injury_weeks
                .get(subject_id.as_str())
                .is_some_and(|w| w.contains(&week));
            WeeklyRow {
                features: total.iter().map(|v| v / count as f64).collect(),
                subject_id,
                week,
                injured,
            }
        })
        .collect();

    let mut feature_names = vec!["duration_minutes".to_string()];
    feature_names.extend(gps.feature_names.iter().cloned());
    Ok(WeeklyFrame {
        feature_names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::GpsSession;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn session(id: &str, d: NaiveDate, v: f64) -> GpsSession {
        GpsSession {
            subject_id: id.into(),
            date: d,
            duration_minutes: 60.0,
            features: vec![v],
        }
    }

    fn table(sessions: Vec<GpsSession>) -> GpsTable {
        GpsTable {
            feature_names: vec!["DistanceTotal".into()],
            sessions,
        }
    }

    // 2014-07-01 is a Tuesday in ISO week 27.
    const START: (i32, u32, u32) = (2014, 7, 1);

    #[test]
    fn mean_within_week() {
        let t = table(vec![
            session("a", date(2014, 7, 1), 4.0),
            session("a", date(2014, 7, 3), 6.0),
            session("a", date(2014, 7, 8), 10.0),
        ]);
        let f = aggregate_weekly(&t, &[], Approach::B, date(START.0, START.1, START.2)).unwrap();
        assert_eq!(f.rows.len(), 2);
        assert_eq!(f.rows[0].features, vec![60.0, 5.0]);
        assert_eq!(
            f.rows[0].week,
            IsoWeek {
                year: 2014,
                week: 27
            }
        );
        assert!(!f.rows[0].injured);
        assert_eq!(f.feature_names, vec!["duration_minutes", "DistanceTotal"]);
    }

    #[test]
    fn approach_filters() {
        let t = table(vec![
            session("hurt", date(2014, 7, 1), 1.0),
            session("hurt", date(2014, 7, 2), 1.0),
            session("hurt", date(2014, 7, 8), 1.0),
            session("fine", date(2014, 7, 1), 1.0),
            session("early", date(2014, 7, 1), 1.0),
            session("early", date(2014, 7, 8), 1.0),
        ]);
        let events = vec![
            // day 8 = 2014-07-08, ISO week 28
            InjuryEvent {
                subject_id: "hurt".into(),
                day: 8,
                intrinsic: true,
                days_unavailable: 5,
            },
            InjuryEvent {
                subject_id: "early".into(),
                day: 2,
                intrinsic: true,
                days_unavailable: 5,
            },
        ];
        let start = date(START.0, START.1, START.2);
        let a = aggregate_weekly(&t, &events, Approach::A, start).unwrap();
        let subjects: BTreeSet<_> = a.rows.iter().map(|r| r.subject_id.as_str()).collect();
        assert_eq!(subjects, BTreeSet::from(["hurt"]));
        assert_eq!(a.rows.iter().filter(|r| r.injured).count(), 1);
        assert_eq!(a.rows.iter().find(|r| r.injured).unwrap().week.week, 28);

        let b = aggregate_weekly(&t, &events, Approach::B, start).unwrap();
        assert_eq!(b.rows.len(), 5);
        assert!(b
            .rows
            .iter()
            .filter(|r| r.subject_id == "fine")
            .all(|r| !r.injured));
    }

    #[test]
    fn row_count_is_distinct_subject_weeks() {
        let t = table(vec![
            session("a", date(2014, 7, 1), 1.0),
            session("a", date(2014, 7, 2), 2.0),
            session("b", date(2014, 7, 2), 3.0),
            session("b", date(2014, 7, 20), 3.0),
            session("b", date(2014, 7, 21), 3.0),
        ]);
        let f = aggregate_weekly(&t, &[], Approach::B, date(2014, 7, 1)).unwrap();
        // (a,27) (b,27) (b,29) (b,30)
        assert_eq!(f.rows.len(), 4);
    }

    #[test]
    fn empty_week_set() {
        let t = table(vec![session("a", date(2014, 7, 1), 1.0)]);
        assert!(matches!(
            aggregate_weekly(&t, &[], Approach::A, date(2014, 7, 1)),
            Err(IngestError::EmptyWeekSet)
        ));
    }
}
