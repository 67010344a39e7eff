use std::fs;
use std::path::Path;

use anglerank::{IncompleteKind, IncompleteRanking, Ranking, StandardizedRanking};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Complete,
    /// Empty cells mark unranked items.
    Subset,
    /// `*` cells mark items ranked below the top k.
    Topk,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Complete(Vec<Ranking>),
    Incomplete(Vec<IncompleteRanking>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    pub t: usize,
    pub item_names: Option<Vec<String>>,
    pub kind: DataKind,
    pub rows: Rows,
}

impl RankingDataset {
    pub fn len(&self) -> usize {
        match &self.rows {
            Rows::Complete(r) => r.len(),
            Rows::Incomplete(r) => r.len(),
        }
    }

    pub fn standardized(&self) -> CliResult<Vec<StandardizedRanking>> {
        match &self.rows {
            Rows::Complete(r) => Ok(r.iter().map(Ranking::standardize).collect()),
            Rows::Incomplete(_) => Err(CliError::usage("this command needs complete rankings")),
        }
    }

    /// Rows as partial rankings; complete rows become partial rankings with
    /// nothing missing.
    pub fn partials(&self) -> Vec<IncompleteRanking> {
        match &self.rows {
            Rows::Complete(r) => r.iter().map(|x| IncompleteRanking::from_complete(x, IncompleteKind::Subset)).collect(),
            Rows::Incomplete(r) => r.clone(),
        }
    }
}

enum Cell {
    Rank(usize),
    Empty,
    Star,
}

fn parse_cell(s: &str) -> Option<Cell> {
    match s.trim() {
        "" => Some(Cell::Empty),
        "*" => Some(Cell::Star),
        v => v.parse().ok().map(Cell::Rank),
    }
}

pub fn parse_csv(path: &Path, kind: DataKind) -> CliResult<RankingDataset> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    parse_csv_str(&text, kind).map_err(|e| match e {
        CliError::Usage(m) => CliError::usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Rows are numbered from 1 and include the header when present.
pub fn parse_csv_str(text: &str, kind: DataKind) -> CliResult<RankingDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::usage(format!("row {}: {e}", i + 1)))?;
        // blank lines come through as a single empty field
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        records.push((line, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(CliError::usage("no rows"));
    };
    let t = first.len();
    let item_names = if first.iter().all(|c| parse_cell(c).is_some()) {
        None
    } else {
        Some(first.iter().map(|c| c.trim().to_string()).collect::<Vec<_>>())
    };
    let data = &records[usize::from(item_names.is_some())..];
    if data.is_empty() {
        return Err(CliError::usage("no data rows"));
    }

    let mut complete = Vec::new();
    let mut partial = Vec::new();
    for (line, rec) in data {
        let err = |msg: String| CliError::usage(format!("row {line}: {msg}"));
        if rec.len() != t {
            return Err(err(format!("expected {t} columns, found {}", rec.len())));
        }
        let mut observed = Vec::with_capacity(t);
        for (j, raw) in rec.iter().enumerate() {
            let cell = parse_cell(raw).ok_or_else(|| err(format!("column {}: malformed integer {raw:?}", j + 1)))?;
            observed.push(match (cell, kind) {
                (Cell::Rank(r), _) => Some(r),
                (Cell::Empty, DataKind::Subset) | (Cell::Star, DataKind::Topk) => None,
                (Cell::Empty, _) => return Err(err(format!("column {}: empty cell in a {kind:?} dataset", j + 1))),
                (Cell::Star, _) => return Err(err(format!("column {}: `*` cell in a {kind:?} dataset", j + 1))),
            });
        }
        match kind {
            DataKind::Complete => {
                let ranks = observed.into_iter().map(|r| r.expect("complete rows have no gaps")).collect();
                complete.push(Ranking::new(ranks).map_err(|e| err(e.to_string()))?);
            }
            DataKind::Subset | DataKind::Topk => {
                let k = if kind == DataKind::Subset { IncompleteKind::Subset } else { IncompleteKind::TopK };
                partial.push(IncompleteRanking::new(k, observed).map_err(|e| err(e.to_string()))?);
            }
        }
    }
    let rows = if kind == DataKind::Complete { Rows::Complete(complete) } else { Rows::Incomplete(partial) };
    Ok(RankingDataset { t, item_names, kind, rows })
}

/// Reads a single-column vector and rescales it to unit length.
pub fn read_unit_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    parse_unit_vector(&text).map_err(|m| CliError::usage(format!("{}: {m}", path.display())))
}

pub fn parse_unit_vector(text: &str) -> Result<Vec<f64>, String> {
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let x: f64 = s.parse().map_err(|_| format!("line {}: not a number: {s:?}", i + 1))?;
        if !x.is_finite() {
            return Err(format!("line {}: not finite", i + 1));
        }
        v.push(x);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v.is_empty() || norm == 0.0 {
        return Err("vector is empty or zero".into());
    }
    if (norm - 1.0).abs() > 1e-6 {
        log::warn!("vector has norm {norm}; rescaling to unit length");
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// Writes rows as CSV text.
pub fn to_csv<I, R>(header: &[String], rows: I) -> CliResult<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::usage(format!("writing CSV: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::usage(format!("writing CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}
