//! Trajectory and table writers. JSON floats use the shortest round-trip
//! representation; CSV floats are written with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use smallbody::finite_eps::{ConvergenceReport, EpsRecord};
use smallbody::limit_dynamics::{BlobRecord, TrajectoryRecord};

use crate::config::OutputFormat;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> std::io::Result<()> {
    let mut out = create(path)?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn blob_header(header: &mut Vec<String>, blobs: &[BlobRecord]) {
    for j in 0..blobs.len() {
        header.extend([format!("x{j}_1"), format!("x{j}_2"), format!("g{j}")]);
    }
}

fn blob_row(row: &mut Vec<String>, blobs: &[BlobRecord]) {
    for b in blobs {
        row.extend([float(b.x[0]), float(b.x[1]), float(b.strength)]);
    }
}

fn write_rows(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_limit_csv(path: &Path, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    let mut header: Vec<String> = ["t", "h1", "h2", "xi1", "xi2", "H", "support_radius"]
        .map(String::from)
        .into();
    if let Some(first) = records.first() {
        blob_header(&mut header, &first.blobs);
    }
    let rows = records
        .iter()
        .map(|r| {
            let mut row: Vec<String> = [
                r.t,
                r.h[0],
                r.h[1],
                r.xi[0],
                r.xi[1],
                r.hamiltonian,
                r.support_radius,
            ]
            .map(float)
            .into();
            blob_row(&mut row, &r.blobs);
            row
        })
        .collect();
    write_rows(path, header, rows)
}

pub fn write_coupled_csv(path: &Path, records: &[EpsRecord]) -> std::io::Result<()> {
    let mut header: Vec<String> = [
        "t",
        "h1",
        "h2",
        "xi1",
        "xi2",
        "H",
        "support_radius",
        "ell1",
        "ell2",
        "r",
        "theta",
    ]
    .map(String::from)
    .into();
    if let Some(first) = records.first() {
        blob_header(&mut header, &first.blobs);
    }
    let rows = records
        .iter()
        .map(|r| {
            let mut row: Vec<String> = [
                r.t,
                r.h[0],
                r.h[1],
                r.xi[0],
                r.xi[1],
                r.energy,
                r.support_radius,
                r.ell[0],
                r.ell[1],
                r.r,
                r.theta,
            ]
            .map(float)
            .into();
            blob_row(&mut row, &r.blobs);
            row
        })
        .collect();
    write_rows(path, header, rows)
}

pub fn write_limit(
    path: &Path,
    format: OutputFormat,
    records: &[TrajectoryRecord],
) -> std::io::Result<()> {
    match format {
        OutputFormat::Jsonl => write_jsonl(path, records),
        OutputFormat::Csv => write_limit_csv(path, records),
    }
}

pub fn write_coupled(
    path: &Path,
    format: OutputFormat,
    records: &[EpsRecord],
) -> std::io::Result<()> {
    match format {
        OutputFormat::Jsonl => write_jsonl(path, records),
        OutputFormat::Csv => write_coupled_csv(path, records),
    }
}

/// `epsilon, sup_error, final_error, energy_drift, max_eps_r`, one row per run.
pub fn write_convergence_table(path: &Path, report: &ConvergenceReport) -> std::io::Result<()> {
    let header = [
        "epsilon",
        "sup_error",
        "final_error",
        "energy_drift",
        "max_eps_r",
    ]
    .map(String::from)
    .into();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            [
                r.epsilon,
                r.sup_error,
                r.final_error,
                r.energy_drift,
                r.max_eps_r,
            ]
            .map(float)
            .into()
        })
        .collect();
    write_rows(path, header, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}
