//! Flat CSV serialization of transition datasets.
//!
//! Columns: state components `s0..`, `action`, `reward`, next-state
//! components `ns0..`, `terminal` (0/1).

use std::path::Path;

use anyhow::{bail, Context, Result};
use dqpope_core::env::Transition;

use crate::csvout::{Cell, CsvWriter};

pub fn write_dataset(data: &[Transition], path: &Path) -> Result<()> {
    if data.is_empty() {
        bail!("dataset is empty");
    }
    let d = data[0].state.len();
    let mut header: Vec<String> = (0..d).map(|i| format!("s{i}")).collect();
    header.push("action".into());
    header.push("reward".into());
    header.extend((0..d).map(|i| format!("ns{i}")));
    header.push("terminal".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvWriter::create(path, &header_refs)?;
    for tr in data {
        let mut cells: Vec<Cell> = tr.state.iter().map(|x| Cell::Float(*x)).collect();
        cells.push(Cell::Int(tr.action as i64));
        cells.push(Cell::Float(tr.reward));
        cells.extend(tr.next_state.iter().map(|x| Cell::Float(*x)));
        cells.push(Cell::Int(tr.terminal as i64));
        out.row(&cells)?;
    }
    out.finish()
}

pub fn read_dataset(path: &Path) -> Result<Vec<Transition>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("missing header row")?;
    let columns: Vec<&str> = header.split(',').collect();
    let d = columns
        .iter()
        .position(|c| *c == "action")
        .context("missing `action` column")?;
    let expected = 2 * d + 3;
    if columns.len() != expected {
        bail!("expected {expected} columns, found {}", columns.len());
    }
    let mut data = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            bail!("row {} has {} fields, expected {expected}", lineno + 2, fields.len());
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("bad number {s:?} on row {}", lineno + 2))
        };
        let state: Vec<f64> = fields[..d].iter().map(|s| parse(s)).collect::<Result<_>>()?;
        let action = fields[d]
            .parse::<usize>()
            .with_context(|| format!("bad action on row {}", lineno + 2))?;
        let reward = parse(fields[d + 1])?;
        let next_state: Vec<f64> = fields[d + 2..2 * d + 2]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        let terminal = match fields[2 * d + 2] {
            "0" => false,
            "1" => true,
            other => bail!("bad terminal flag {other:?} on row {}", lineno + 2),
        };
        data.push(Transition {
            state,
            action,
            reward,
            next_state,
            terminal,
        });
    }
    if data.is_empty() {
        bail!("dataset file has no rows");
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = vec![
            Transition {
                state: vec![0.25, -1.5],
                action: 1,
                reward: 0.125,
                next_state: vec![0.5, 2.0],
                terminal: false,
            },
            Transition {
                state: vec![1.0, 0.0],
                action: 0,
                reward: -3.0,
                next_state: vec![0.0, 0.0],
                terminal: true,
            },
        ];
        write_dataset(&data, &path).unwrap();
        let loaded = read_dataset(&path).unwrap();
        assert_eq!(data, loaded);
    }
}
