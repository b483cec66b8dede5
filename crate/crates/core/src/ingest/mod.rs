//! Domain types for exposure records, injury logs and GPS sessions, plus the
//! preprocessing that turns raw club exports into model inputs.

mod csvio;
mod synth;
mod weekly;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};

pub use csvio::{
    load_exposure_csv, load_gps_csv, load_injuries_csv, read_exposure, read_gps, read_injuries,
    write_exposure, write_gps, write_injuries,
};
pub use synth::{
    gps_feature_names, synth_generate, synth_planted_table, PlantedTable, PlantedTableConfig,
    SynthConfig, SynthOutput,
};
pub use weekly::{aggregate_weekly, Approach, IsoWeek, WeeklyFrame, WeeklyRow};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("subject {subject}: day {day} appears more than once")]
    DuplicateDay { subject: String, day: u32 },
    #[error("subject {subject}: cannot truncate {a} days from injury day {injury_day}")]
    TruncationTooDeep {
        subject: String,
        injury_day: u32,
        a: u32,
    },
    #[error("subject {0} has no recorded injury")]
    NotInjured(String),
    #[error("response must be positive, got {0}")]
    NonPositiveResponse(f64),
    #[error("no weekly rows survive the approach filter")]
    EmptyWeekSet,
    #[error("speed fraction {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid synthetic cohort settings: {0}")]
    InvalidSynthConfig(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExposureDay {
    pub day: u32,
    pub training_minutes: f64,
    pub match_minutes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Injured { day: u32 },
    Censored { last_day: u32 },
}

/// One subject's daily training and match minutes with the time-to-event
/// outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureRecord {
    pub subject_id: String,
    pub days: Vec<ExposureDay>,
    pub outcome: Outcome,
}

impl ExposureRecord {
    pub fn training_series(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.training_minutes).collect()
    }

    pub fn match_series(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.match_minutes).collect()
    }

    pub fn last_day(&self) -> u32 {
        self.days.last().map_or(0, |d| d.day)
    }

    pub fn injury_day(&self) -> Option<u32> {
        match self.outcome {
            Outcome::Injured { day } => Some(day),
            Outcome::Censored { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InjuryEvent {
    pub subject_id: String,
    pub day: u32,
    pub intrinsic: bool,
    pub days_unavailable: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpsSession {
    pub subject_id: String,
    pub date: NaiveDate,
    pub duration_minutes: f64,
    /// Ordered as the owning table's `feature_names`.
    pub features: Vec<f64>,
}

/// Sessions sharing one feature schema.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsTable {
    pub feature_names: Vec<String>,
    pub sessions: Vec<GpsSession>,
}

/// Inserts zero-minute rows for every missing day in `1..=max_day`.
pub fn fill_missing_days(record: &ExposureRecord) -> ExposureRecord {
    let max_day = record.last_day();
    let mut by_day: BTreeMap<u32, ExposureDay> = BTreeMap::new();
    for d in &record.days {
        by_day.insert(d.day, *d);
    }
    let days = (1..=max_day)
        .map(|day| {
            by_day.get(&day).copied().unwrap_or(ExposureDay {
                day,
                training_minutes: 0.0,
                match_minutes: 0.0,
            })
        })
        .collect();
    ExposureRecord {
        subject_id: record.subject_id.clone(),
        days,
        outcome: record.outcome,
    }
}

/// Keeps days `1..=T - a` of an injured record; the outcome stays `Injured(T)`.
pub fn truncate_record(record: &ExposureRecord, a: u32) -> Result<ExposureRecord, IngestError> {
    let t = record
        .injury_day()
        .ok_or_else(|| IngestError::NotInjured(record.subject_id.clone()))?;
    if t < a + 2 {
        return Err(IngestError::TruncationTooDeep {
            subject: record.subject_id.clone(),
            injury_day: t,
            a,
        });
    }
    let end = t - a;
    Ok(ExposureRecord {
        subject_id: record.subject_id.clone(),
        days: record
            .days
            .iter()
            .filter(|d| d.day <= end)
            .copied()
            .collect(),
        outcome: record.outcome,
    })
}

/// Subject-level inclusion rules applied before modelling.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Injuries on or before this day disqualify the subject.
    pub early_injury_days: u32,
    /// Subjects removed outright, e.g. goalkeepers.
    pub excluded_subjects: BTreeSet<String>,
    /// Injuries with zero days lost are skipped in favour of the next one.
    pub skip_zero_days_lost: bool,
    /// A first qualifying injury that is not intrinsic disqualifies the subject.
    pub require_intrinsic: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            early_injury_days: 3,
            excluded_subjects: BTreeSet::new(),
            skip_zero_days_lost: true,
            require_intrinsic: true,
        }
    }
}

impl FilterConfig {
    pub const KEYS: [&'static str; 4] = [
        "early_injury_days",
        "excluded_subjects",
        "skip_zero_days_lost",
        "require_intrinsic",
    ];

    /// Pulls this struct's keys out of `cfg`, leaving the rest.
    pub fn take_from(cfg: &mut KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        Ok(Self {
            early_injury_days: cfg.take_or("early_injury_days", d.early_injury_days)?,
            excluded_subjects: cfg
                .take_list("excluded_subjects")
                .map(|v| v.into_iter().collect())
                .unwrap_or_default(),
            skip_zero_days_lost: cfg.take_bool_or("skip_zero_days_lost", d.skip_zero_days_lost)?,
            require_intrinsic: cfg.take_bool_or("require_intrinsic", d.require_intrinsic)?,
        })
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = KvConfig::parse(text)?;
        let out = Self::take_from(&mut cfg)?;
        cfg.finish()?;
        Ok(out)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("early_injury_days", self.early_injury_days.to_string()),
            (
                "excluded_subjects",
                self.excluded_subjects
                    .iter()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("skip_zero_days_lost", self.skip_zero_days_lost.to_string()),
            ("require_intrinsic", self.require_intrinsic.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExclusionRule {
    ExcludedSubject,
    EarlyInjury,
    NonIntrinsicInjury,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub rule: ExclusionRule,
    /// Day of the triggering injury, when there is one.
    pub day: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub kept: Vec<ExposureRecord>,
    pub exclusions: Vec<Exclusion>,
    /// `(subject, day)` of zero-days-lost injuries passed over.
    pub skipped_transient: Vec<(String, u32)>,
}

/// Assigns each record its first qualifying injury (or censoring) and drops
/// subjects that break a rule. Injuries after the last recorded day leave the
/// subject censored.
pub fn filter_subjects(
    records: &[ExposureRecord],
    events: &[InjuryEvent],
    rules: &FilterConfig,
) -> FilterResult {
    let mut by_subject: BTreeMap<&str, Vec<&InjuryEvent>> = BTreeMap::new();
    for e in events {
        by_subject.entry(e.subject_id.as_str()).or_default().push(e);
    }
    for list in by_subject.values_mut() {
        list.sort_by_key(|e| e.day);
    }

    let mut out = FilterResult {
        kept: Vec::new(),
        exclusions: Vec::new(),
        skipped_transient: Vec::new(),
    };
    for record in records {
        let id = record.subject_id.as_str();
        if rules.excluded_subjects.contains(id) {
            log::info!("excluding {id}: listed in excluded_subjects");
            out.exclusions.push(Exclusion {
                subject_id: id.to_string(),
                rule: ExclusionRule::ExcludedSubject,
                day: None,
            });
            continue;
        }
        let last_day = record.last_day();
        let mut first = None;
        for e in by_subject.get(id).into_iter().flatten() {
            if e.day > last_day {
                break;
            }
            if rules.skip_zero_days_lost && e.days_unavailable == 0 {
                log::info!("{id}: skipping zero-days-lost injury on day {}", e.day);
                out.skipped_transient.push((id.to_string(), e.day));
                continue;
            }
            first = Some(*e);
            break;
        }
        let outcome = match first {
            None => Outcome::Censored { last_day },
            Some(e) if e.day <= rules.early_injury_days => {
                log::info!("excluding {id}: injured on day {}", e.day);
                out.exclusions.push(Exclusion {
                    subject_id: id.to_string(),
                    rule: ExclusionRule::EarlyInjury,
                    day: Some(e.day),
                });
                continue;
            }
            Some(e) if rules.require_intrinsic && !e.intrinsic => {
                log::info!("excluding {id}: first injury (day {}) not intrinsic", e.day);
                out.exclusions.push(Exclusion {
                    subject_id: id.to_string(),
                    rule: ExclusionRule::NonIntrinsicInjury,
                    day: Some(e.day),
                });
                continue;
            }
            Some(e) => Outcome::Injured { day: e.day },
        };
        out.kept.push(ExposureRecord {
            subject_id: record.subject_id.clone(),
            days: record.days.clone(),
            outcome,
        });
    }
    out
}

pub fn log_transform(y: f64) -> Result<f64, IngestError> {
    if y > 0.0 && y.is_finite() {
        Ok(y.ln())
    } else {
        Err(IngestError::NonPositiveResponse(y))
    }
}

pub fn exp_back(z: f64) -> f64 {
    z.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SeverityCategory {
    Transient,
    Mild,
    Moderate,
    Severe,
}

/// 0-7 transient, 8-28 mild, 29-83 moderate, 84+ severe.
pub fn bin_severity(days_unavailable: u32) -> SeverityCategory {
    match days_unavailable {
        0..=7 => SeverityCategory::Transient,
        8..=28 => SeverityCategory::Mild,
        29..=83 => SeverityCategory::Moderate,
        _ => SeverityCategory::Severe,
    }
}

/// Speed zone 1..=6 for a fraction of the athlete's maximum speed. Bins are
/// upper-exclusive: 0.35 is zone 2, 0.75 is zone 6.
pub fn speed_zone(fraction_of_max_speed: f64) -> Result<u8, IngestError> {
    let f = fraction_of_max_speed;
    if !(0.0..=1.0).contains(&f) {
        return Err(IngestError::OutOfRange(f));
    }
    const EDGES: [f64; 5] = [0.35, 0.45, 0.55, 0.65, 0.75];
    Ok(1 + EDGES.iter().filter(|&&edge| f >= edge).count() as u8)
}
