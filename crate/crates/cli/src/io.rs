//! Solutions on disk: a JSON header next to a CSV with one row per slice.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kinrep::flux::FluxSpec;
use kinrep::solver::{mass_of, GridSpec, Solution, SolutionKind};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionHeader {
    pub spec: GridSpec,
    pub flux: FluxSpec,
    pub flux_id: String,
    pub kind: SolutionKind,
    pub t0: f64,
    pub dt: f64,
    pub t_steps: usize,
    /// CSV file name, relative to the header.
    pub data: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`; returns the header path.
pub fn write_solution(dir: &Path, stem: &str, sol: &Solution) -> CliResult<PathBuf> {
    let csv_name = format!("{stem}.csv");
    let csv_path = dir.join(&csv_name);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let mut head = vec!["t".to_string()];
    head.extend((0..sol.spec.ncells()).map(|i| format!("u{i}")));
    w.write_record(&head).map_err(|e| io_err(&csv_path, e))?;
    for (k, u) in sol.slices.iter().enumerate() {
        let mut row = vec![sol.time(k).to_string()];
        row.extend(u.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| io_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    let header = SolutionHeader {
        spec: sol.spec.clone(),
        flux: sol.flux.spec(),
        flux_id: sol.flux_id.clone(),
        kind: sol.kind,
        t0: sol.t0,
        dt: sol.dt,
        t_steps: sol.t_steps,
        data: csv_name,
    };
    let json_path = dir.join(format!("{stem}.json"));
    write_json(&json_path, &header)?;
    Ok(json_path)
}

pub fn read_solution(header_path: &Path) -> CliResult<Solution> {
    let ingest = |file: &Path, detail: String| CliError::Ingest {
        file: file.display().to_string(),
        detail,
    };
    let text =
        std::fs::read_to_string(header_path).map_err(|e| ingest(header_path, e.to_string()))?;
    let h: SolutionHeader =
        serde_json::from_str(&text).map_err(|e| ingest(header_path, e.to_string()))?;
    let flux = h
        .flux
        .build()
        .map_err(|e| ingest(header_path, e.to_string()))?;
    let ncells = h.spec.ncells();
    let expected = match h.kind {
        SolutionKind::Quasi => 2 * h.t_steps + 1,
        _ => h.t_steps + 1,
    };
    let csv_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&h.data);
    let mut r = csv::Reader::from_path(&csv_path).map_err(|e| ingest(&csv_path, e.to_string()))?;
    let mut slices = Vec::with_capacity(expected);
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ingest(&csv_path, e.to_string()))?;
        if rec.len() != ncells + 1 {
            return Err(ingest(
                &csv_path,
                format!("row {k} has {} fields, expected {}", rec.len(), ncells + 1),
            ));
        }
        let vals: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| ingest(&csv_path, format!("row {k}: {e}")))?;
        let t = h.t0 + k as f64 * h.dt;
        if (vals[0] - t).abs() > 1e-9 * h.dt.max(1.0) {
            return Err(ingest(
                &csv_path,
                format!("row {k} has t = {}, expected {t}", vals[0]),
            ));
        }
        if let Some(v) = vals[1..]
            .iter()
            .find(|v| !(v.is_finite() && **v >= 0.0 && **v <= flux.u_max))
        {
            return Err(ingest(
                &csv_path,
                format!("row {k}: value {v} outside [0, {}]", flux.u_max),
            ));
        }
        slices.push(vals[1..].to_vec());
    }
    if slices.len() != expected {
        return Err(ingest(
            &csv_path,
            format!("{} slices, expected {expected}", slices.len()),
        ));
    }
    let mass = slices.iter().map(|u| mass_of(&h.spec, u)).collect();
    Ok(Solution {
        spec: h.spec,
        flux_id: h.flux_id,
        flux,
        kind: h.kind,
        t0: h.t0,
        dt: h.dt,
        t_steps: h.t_steps,
        slices,
        mass,
    })
}

/// Cell values from a one-column CSV; a non-numeric first line is a header.
pub fn read_cells(path: &Path) -> CliResult<Vec<f64>> {
    let ingest = |detail: String| CliError::Ingest {
        file: path.display().to_string(),
        detail,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| ingest(e.to_string()))?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ingest(e.to_string()))?;
        let field = rec.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(ingest(format!("line {}: {e}", k + 1))),
        }
    }
    Ok(out)
}
