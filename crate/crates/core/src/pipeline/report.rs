use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{eigen_file, ExperimentReport, SweepTable};
use crate::brown::write_text;
use crate::error::{Error, Result};
use crate::linalg::C64;

pub const REPORT_FILE: &str = "report.json";

/// Writes `report.json`, one eigenvalue CSV per dimension (`trial,index,re,im`)
/// and, when a grid was configured, field and density CSVs per cell.
/// Returns the paths written.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let mut by_n: BTreeMap<usize, String> = BTreeMap::new();
    for cell in report.cells.iter().filter(|c| c.error.is_none()) {
        let csv = by_n.entry(cell.n).or_insert_with(|| String::from("trial,index,re,im\n"));
        for (i, z) in cell.eigenvalues.iter().enumerate() {
            writeln!(csv, "{},{},{:.16e},{:.16e}", cell.trial, i, z.re, z.im).unwrap();
        }
    }
    for (n, csv) in &by_n {
        let path = dir.join(eigen_file(*n));
        write_text(&path, csv)?;
        written.push(path);
    }
    for cell in &report.cells {
        if let (Some(f), Some(name)) = (&cell.field, cell.files.get("field")) {
            let path = dir.join(name);
            write_text(&path, &f.to_csv())?;
            written.push(path);
        }
        if let (Some(d), Some(name)) = (&cell.density, cell.files.get("density")) {
            let path = dir.join(name);
            write_text(&path, &d.to_csv(false))?;
            written.push(path);
        }
    }

    let path = dir.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_text(&path, &json)?;
    written.push(path);
    Ok(written)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn ingest(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses an eigenvalue CSV into per-trial lists.
fn parse_eigen_csv(path: &Path) -> Result<BTreeMap<usize, Vec<C64>>> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "trial,index,re,im")) => {}
        _ => return Err(ingest(path, 1, "expected header trial,index,re,im")),
    }
    let mut out: BTreeMap<usize, Vec<C64>> = BTreeMap::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(ingest(path, i + 1, format!("expected 4 fields, got {}", fields.len())));
        }
        let bad = |what: &str| ingest(path, i + 1, format!("cannot parse {what}"));
        let trial: usize = fields[0].parse().map_err(|_| bad("trial"))?;
        let index: usize = fields[1].parse().map_err(|_| bad("index"))?;
        let re: f64 = fields[2].parse().map_err(|_| bad("re"))?;
        let im: f64 = fields[3].parse().map_err(|_| bad("im"))?;
        let list = out.entry(trial).or_default();
        if index != list.len() {
            return Err(ingest(path, i + 1, format!("index {index} out of sequence")));
        }
        list.push(C64::new(re, im));
    }
    Ok(out)
}

/// Reads a report written by [`emit_report`], restoring eigenvalues from the
/// CSVs and checking that every referenced file exists and has the expected
/// header.
pub fn load_report(dir: &Path) -> Result<ExperimentReport> {
    let path = dir.join(REPORT_FILE);
    let mut report: ExperimentReport =
        serde_json::from_str(&read(&path)?).map_err(|e| ingest(&path, e.line(), e.to_string()))?;
    let mut cache: BTreeMap<String, BTreeMap<usize, Vec<C64>>> = BTreeMap::new();
    for cell in &mut report.cells {
        for (role, name) in &cell.files {
            let file = dir.join(name);
            match role.as_str() {
                "eigenvalues" => {
                    if !cache.contains_key(name) {
                        cache.insert(name.clone(), parse_eigen_csv(&file)?);
                    }
                    let eig = cache[name]
                        .get(&cell.trial)
                        .ok_or_else(|| ingest(&file, 0, format!("no rows for trial {}", cell.trial)))?;
                    if eig.len() != cell.n {
                        return Err(ingest(&file, 0, format!("trial {} has {} rows, expected {}", cell.trial, eig.len(), cell.n)));
                    }
                    cell.eigenvalues = eig.clone();
                }
                _ => {
                    let text = read(&file)?;
                    let header = text.lines().next().unwrap_or("");
                    if !(header.starts_with("re,im,")) {
                        return Err(ingest(&file, 1, format!("unexpected header {header:?}")));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Writes `sweep.json` and `sweep.csv`.
pub fn emit_sweep(table: &SweepTable, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("sweep.json");
    write_text(&json, &serde_json::to_string_pretty(table).expect("sweep serializes"))?;
    let csv = dir.join("sweep.csv");
    write_text(&csv, &table.to_csv())?;
    Ok(vec![json, csv])
}
