//! CSV and JSON file helpers and the tabular schemas shared by the tools.
//!
//! Amounts are integer cents in every file; [`format_euros`] renders them
//! with exactly two decimals for human-facing output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::design::{ExperimentDesign, Task};
use crate::error::{Error, Result};
use crate::simulate::{ChoiceDataset, ChoiceRecord, Group};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (index, row) in r.deserialize().enumerate() {
        out.push(row.map_err(|e| Error::Data {
            index,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `1234` -> `"12.34"`.
pub fn format_euros(cents: u32) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

/// Inverse of [`format_euros`]; accepts only exactly two decimals.
pub fn parse_euros(s: &str) -> Result<u32> {
    let bad = || Error::invalid(format!("not a two-decimal euro amount: {s:?}"));
    let (whole, frac) = s.split_once('.').ok_or_else(bad)?;
    if frac.len() != 2 || whole.is_empty() || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let whole: u32 = whole.parse().map_err(|_| bad())?;
    let frac: u32 = frac.parse().map_err(|_| bad())?;
    whole.checked_mul(100).and_then(|w| w.checked_add(frac)).ok_or_else(bad)
}

/// One row of `trials.csv`. Baseline rows leave the addend columns empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRow {
    pub group: Group,
    pub task: Task,
    pub game_id: u32,
    pub repetition: u32,
    pub round: u32,
    pub self_cents: u32,
    pub other_cents: u32,
    pub self1: Option<u32>,
    pub self2: Option<u32>,
    pub other1: Option<u32>,
    pub other2: Option<u32>,
}

/// Baseline rows followed by treatment rows carrying the decomposition.
pub fn trial_rows(design: &ExperimentDesign) -> Vec<TrialRow> {
    let mut out = Vec::with_capacity(2 * design.trials.len());
    for group in [Group::B, Group::T] {
        for t in &design.trials {
            let d = (group == Group::T).then_some(t.decomposition);
            out.push(TrialRow {
                group,
                task: t.spec.task,
                game_id: t.spec.game_id,
                repetition: t.spec.repetition,
                round: t.spec.round,
                self_cents: t.spec.self_cents,
                other_cents: t.spec.other_cents,
                self1: d.map(|d| d.self1),
                self2: d.map(|d| d.self2),
                other1: d.map(|d| d.other1),
                other2: d.map(|d| d.other2),
            });
        }
    }
    out
}

pub fn write_choices(path: &Path, data: &ChoiceDataset) -> Result<()> {
    write_csv(path, &data.records)
}

pub fn read_choices(path: &Path) -> Result<ChoiceDataset> {
    let records: Vec<ChoiceRecord> = read_csv(path)?;
    ChoiceDataset::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euros_round_trip() {
        for c in [0, 5, 52, 100, 1222, 1852, 999_999] {
            assert_eq!(parse_euros(&format_euros(c)).unwrap(), c);
        }
        assert_eq!(format_euros(52), "0.52");
        assert!(parse_euros("1.5").is_err());
        assert!(parse_euros("1,50").is_err());
        assert!(parse_euros("-1.00").is_err());
    }

    #[test]
    fn trial_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.csv");
        let design = ExperimentDesign::generate(4).unwrap();
        let rows = trial_rows(&design);
        assert_eq!(rows.len(), 880);
        assert!(rows[0].self1.is_none());
        write_csv(&path, &rows).unwrap();
        let back: Vec<TrialRow> = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }
}
