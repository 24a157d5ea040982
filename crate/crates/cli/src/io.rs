//! Point clouds on disk: CSV with one point per row, or JSON
//! `{"dim": d, "points": [[...], ...], "weights": [...]}`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wattn_core::{EmpiricalMeasure, PointCloud};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn format_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn cloud_from_rows(path: &Path, dim: usize, rows: &[Vec<f64>]) -> Result<PointCloud> {
    if rows.is_empty() {
        return Err(format_err(path, "no points"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(format_err(path, format!("row {i} has {} coordinates, expected {dim}", r.len())));
    }
    Ok(PointCloud::new(dim, rows.concat())?)
}

fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_err(path, format!("row {i}: {e}")))?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_json(path: &Path) -> Result<CloudFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a measure; CSV files and JSON files without weights give `m(X)`.
pub fn read_measure(path: &Path) -> Result<EmpiricalMeasure> {
    if is_json(path) {
        let f = read_json(path)?;
        let cloud = cloud_from_rows(path, f.dim, &f.points)?;
        match f.weights {
            Some(w) => Ok(EmpiricalMeasure::new(cloud, w)?),
            None => Ok(EmpiricalMeasure::uniform(cloud)),
        }
    } else {
        let rows = read_csv(path)?;
        let dim = rows.first().map_or(0, Vec::len);
        Ok(EmpiricalMeasure::uniform(cloud_from_rows(path, dim, &rows)?))
    }
}

/// Reads a point cloud, rejecting weighted JSON input.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let mu = read_measure(path)?;
    if !mu.is_uniform() {
        return Err(format_err(path, "weights are not allowed for a particle cloud"));
    }
    Ok(mu.into_parts().0)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn cloud_file(cloud: &PointCloud) -> CloudFile {
    CloudFile {
        dim: cloud.dim(),
        points: cloud.to_rows(),
        weights: None,
    }
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    if is_json(path) {
        let mut w = create(path)?;
        serde_json::to_writer(&mut w, &cloud_file(cloud)).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        w.flush().map_err(io_err(path))
    } else {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        for p in cloud.points() {
            w.serialize(p).map_err(|source| CliError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        }
        w.flush().map_err(io_err(path))
    }
}

/// One JSON object per line, one line per state.
pub fn write_trajectory(path: &Path, states: &[PointCloud]) -> Result<()> {
    let mut w = create(path)?;
    for (step, s) in states.iter().enumerate() {
        let line = serde_json::json!({ "step": step, "dim": s.dim(), "points": s.to_rows() });
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Single-column CSV with a header.
pub fn write_ratios(path: &Path, ratios: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "ratio").map_err(io_err(path))?;
    for r in ratios {
        writeln!(w, "{r}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}
