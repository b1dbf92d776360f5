//! CSV and JSON writers. Floats are printed with Rust's shortest round-trip
//! formatting, so equal values always give equal bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use smolcircle_core::measures::{EmpiricalMeasure, GridMeasure, MassGridKind};
use smolcircle_core::particle::CoagulationEvent;

use crate::HarnessError;

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// `time,i,j,mass_i_before,mass_j_before`
pub fn write_events(path: &Path, events: &[CoagulationEvent]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    writeln!(w, "time,i,j,mass_i_before,mass_j_before")?;
    for e in events {
        writeln!(w, "{},{},{},{},{}", e.time, e.i, e.j, e.mass_i_before, e.mass_j_before)?;
    }
    w.flush()?;
    Ok(())
}

/// `snapshot_time,x,rescaled_mass,weight`
pub fn write_snapshots(path: &Path, times: &[f64], snapshots: &[EmpiricalMeasure]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    writeln!(w, "snapshot_time,x,rescaled_mass,weight")?;
    for (t, snap) in times.iter().zip(snapshots) {
        for a in snap.atoms() {
            writeln!(w, "{t},{},{},{}", a.x, a.m, a.w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Grid description stored next to each field CSV.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSidecar {
    pub time: f64,
    pub cells: usize,
    pub bins: usize,
    pub mass_grid: &'static str,
    pub ratio: Option<f64>,
    pub reps: Vec<f64>,
    pub total: f64,
    pub dt: f64,
    pub splitting: String,
    pub integrator: String,
    pub clip_budget: f64,
    pub clipped_mass: f64,
}

/// `x_index,bin_index,m_rep,value`, plus a JSON sidecar next to it.
pub fn write_field(
    csv_path: &Path,
    json_path: &Path,
    field: &GridMeasure,
    mut sidecar: FieldSidecar,
) -> Result<(), HarnessError> {
    let mut w = create(csv_path)?;
    writeln!(w, "x_index,bin_index,m_rep,value")?;
    let reps = field.grid().reps();
    for c in 0..field.cells() {
        for (b, m) in reps.iter().enumerate() {
            writeln!(w, "{c},{b},{m},{}", field.get(c, b))?;
        }
    }
    w.flush()?;
    sidecar.cells = field.cells();
    sidecar.bins = field.bins();
    sidecar.reps = reps.to_vec();
    let (name, ratio) = match field.grid().kind() {
        MassGridKind::Integer => ("integer", None),
        MassGridKind::Geometric { ratio } => ("geometric", Some(ratio)),
    };
    sidecar.mass_grid = name;
    sidecar.ratio = ratio;
    write_json(json_path, &sidecar)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes a CSV with a header and rows of already formatted cells.
pub fn write_rows(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
