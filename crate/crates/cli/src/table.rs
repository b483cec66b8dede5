//! Small CSV readers for the generic tabular inputs.

use std::path::Path;

use anyhow::{bail, Context};

/// A headed CSV held as trimmed strings.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
            .collect::<anyhow::Result<Vec<Vec<String>>>>()
            .with_context(|| format!("reading {}", path.display()))?;
        if rows.is_empty() {
            bail!("{} has no data rows", path.display());
        }
        Ok(Self { headers, rows })
    }

    pub fn position(&self, name: &str) -> anyhow::Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no column {name:?}; available: {}", self.headers.join(", ")))
    }

    pub fn column(&self, name: &str) -> anyhow::Result<Vec<String>> {
        let j = self.position(name)?;
        Ok(self.rows.iter().map(|r| r[j].clone()).collect())
    }

    pub fn numeric(&self, name: &str) -> anyhow::Result<Vec<f64>> {
        parse_numbers(&self.column(name)?).with_context(|| format!("column {name:?}"))
    }
}

pub fn parse_numbers(values: &[String]) -> anyhow::Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => bail!("row {}: {v:?} is not a finite number", i + 1),
        })
        .collect()
}

/// Headerless rows of numbers, one sequence per line; lengths may differ.
pub fn read_sequences(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = vec![];
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let fields: Vec<String> = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(str::to_string)
            .collect();
        out.push(
            parse_numbers(&fields).with_context(|| format!("{} line {}", path.display(), i + 1))?,
        );
    }
    if out.is_empty() {
        bail!("{} is empty", path.display());
    }
    Ok(out)
}

/// A one-column numeric series; a non-numeric first line is taken as a header.
pub fn read_series(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut cells = vec![];
    for rec in r.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        if rec.len() != 1 {
            bail!(
                "{}: expected one value per line, found {}",
                path.display(),
                rec.len()
            );
        }
        cells.push(rec[0].to_string());
    }
    if cells.first().is_some_and(|c| c.parse::<f64>().is_err()) {
        cells.remove(0);
    }
    parse_numbers(&cells).with_context(|| format!("reading {}", path.display()))
}
