use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{ExposureDay, ExposureRecord, GpsSession, GpsTable, IngestError, InjuryEvent, Outcome};

const EXPOSURE_HEADER: [&str; 4] = [
    "subject_id",
    "day_index",
    "training_minutes",
    "match_minutes",
];
const INJURY_HEADER: [&str; 4] = ["subject_id", "day", "intrinsic", "days_unavailable"];
const GPS_FIXED: [&str; 3] = ["subject_id", "date", "duration_minutes"];

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn column_positions(
    headers: &csv::StringRecord,
    wanted: &[&str],
) -> Result<Vec<usize>, IngestError> {
    wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| IngestError::MissingColumn((*name).to_string()))
        })
        .collect()
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn field(record: &csv::StringRecord, idx: usize) -> Result<&str, IngestError> {
    record
        .get(idx)
        .map(str::trim)
        .ok_or_else(|| IngestError::MalformedRow {
            line: line_of(record),
            reason: format!("missing field {}", idx + 1),
        })
}

fn parse_minutes(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, IngestError> {
    let raw = field(record, idx)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(IngestError::MalformedRow {
            line: line_of(record),
            reason: format!("{name} = {raw:?} is not a finite non-negative number"),
        }),
    }
}

fn parse_uint(record: &csv::StringRecord, idx: usize, name: &str) -> Result<u32, IngestError> {
    let raw = field(record, idx)?;
    raw.parse::<u32>().map_err(|_| IngestError::MalformedRow {
        line: line_of(record),
        reason: format!("{name} = {raw:?} is not a non-negative integer"),
    })
}

/// Reads an exposure table. Records come out in order of first appearance,
/// each sorted by day and marked censored at its last day.
pub fn read_exposure<R: Read>(reader: R) -> Result<Vec<ExposureRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let pos = column_positions(&headers, &EXPOSURE_HEADER)?;

    let mut order: Vec<String> = Vec::new();
    let mut days: std::collections::HashMap<String, Vec<ExposureDay>> = Default::default();
    for row in rdr.records() {
        let row = row?;
        let subject = field(&row, pos[0])?.to_string();
        let day = parse_uint(&row, pos[1], "day_index")?;
        if day == 0 {
            return Err(IngestError::MalformedRow {
                line: line_of(&row),
                reason: "day_index starts at 1".into(),
            });
        }
        let training_minutes = parse_minutes(&row, pos[2], "training_minutes")?;
        let match_minutes = parse_minutes(&row, pos[3], "match_minutes")?;
        let entry = days.entry(subject.clone()).or_insert_with(|| {
            order.push(subject.clone());
            Vec::new()
        });
        entry.push(ExposureDay {
            day,
            training_minutes,
            match_minutes,
        });
    }

    let mut out = Vec::with_capacity(order.len());
    for subject in order {
        let mut list = days.remove(&subject).unwrap_or_default();
        list.sort_by_key(|d| d.day);
        if let Some(w) = list.windows(2).find(|w| w[0].day == w[1].day) {
            return Err(IngestError::DuplicateDay {
                subject,
                day: w[0].day,
            });
        }
        let last_day = list.last().map_or(0, |d| d.day);
        out.push(ExposureRecord {
            subject_id: subject,
            days: list,
            outcome: Outcome::Censored { last_day },
        });
    }
    Ok(out)
}

pub fn load_exposure_csv(path: &Path) -> Result<Vec<ExposureRecord>, IngestError> {
    read_exposure(open(path)?)
}

pub fn read_injuries<R: Read>(reader: R) -> Result<Vec<InjuryEvent>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let pos = column_positions(&headers, &INJURY_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let intrinsic = match field(&row, pos[2])? {
            "1" => true,
            "0" => false,
            other => {
                return Err(IngestError::MalformedRow {
                    line: line_of(&row),
                    reason: format!("intrinsic = {other:?}, expected 0 or 1"),
                })
            }
        };
        out.push(InjuryEvent {
            subject_id: field(&row, pos[0])?.to_string(),
            day: parse_uint(&row, pos[1], "day")?,
            intrinsic,
            days_unavailable: parse_uint(&row, pos[3], "days_unavailable")?,
        });
    }
    Ok(out)
}

pub fn load_injuries_csv(path: &Path) -> Result<Vec<InjuryEvent>, IngestError> {
    read_injuries(open(path)?)
}

/// Every column after `subject_id,date,duration_minutes` is a feature.
pub fn read_gps<R: Read>(reader: R) -> Result<GpsTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let fixed = column_positions(&headers, &GPS_FIXED)?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|i| !fixed.contains(i)).collect();
    let feature_names: Vec<String> = feature_cols
        .iter()
        .map(|&i| headers[i].trim().to_string())
        .collect();
    let unique: BTreeSet<&String> = feature_names.iter().collect();
    if unique.len() != feature_names.len() {
        return Err(IngestError::Csv("duplicate feature column names".into()));
    }

    let mut sessions = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let date_raw = field(&row, fixed[1])?;
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| {
            IngestError::MalformedRow {
                line: line_of(&row),
                reason: format!("date {date_raw:?} is not YYYY-MM-DD"),
            }
        })?;
        let duration_minutes = parse_minutes(&row, fixed[2], "duration_minutes")?;
        if duration_minutes <= 0.0 {
            return Err(IngestError::MalformedRow {
                line: line_of(&row),
                reason: "duration_minutes must be positive".into(),
            });
        }
        let mut features = Vec::with_capacity(feature_cols.len());
        for (&col, name) in feature_cols.iter().zip(&feature_names) {
            let raw = field(&row, col)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(IngestError::MalformedRow {
                        line: line_of(&row),
                        reason: format!("{name} = {raw:?} is not a finite number"),
                    })
                }
            }
        }
        sessions.push(GpsSession {
            subject_id: field(&row, fixed[0])?.to_string(),
            date,
            duration_minutes,
            features,
        });
    }
    Ok(GpsTable {
        feature_names,
        sessions,
    })
}

pub fn load_gps_csv(path: &Path) -> Result<GpsTable, IngestError> {
    read_gps(open(path)?)
}

pub fn write_exposure<W: Write>(records: &[ExposureRecord], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EXPOSURE_HEADER)?;
    for r in records {
        for d in &r.days {
            w.write_record([
                r.subject_id.clone(),
                d.day.to_string(),
                d.training_minutes.to_string(),
                d.match_minutes.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| IngestError::Csv(e.to_string()))
}

pub fn write_injuries<W: Write>(events: &[InjuryEvent], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(INJURY_HEADER)?;
    for e in events {
        w.write_record([
            e.subject_id.clone(),
            e.day.to_string(),
            if e.intrinsic { "1" } else { "0" }.to_string(),
            e.days_unavailable.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.to_string()))
}

pub fn write_gps<W: Write>(table: &GpsTable, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = GPS_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(table.feature_names.iter().cloned());
    w.write_record(&header)?;
    for s in &table.sessions {
        let mut row = vec![
            s.subject_id.clone(),
            s.date.format("%Y-%m-%d").to_string(),
            s.duration_minutes.to_string(),
        ];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.to_string()))
}
