//! On-disk formats: ensemble directories, field and observation CSVs, JSON
//! reports and run manifests.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use phik_core::bounds::{BoundEntry, BoundReport};
use phik_core::ensemble::{Ensemble, Fidelity};
use phik_core::gp::Observations;
use phik_core::grid::{Axis, Grid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

const COORD_NAMES: [&str; 3] = ["x", "y", "z"];

pub fn coord_names(dim: usize) -> Vec<String> {
    (0..dim)
        .map(|k| COORD_NAMES.get(k).map_or_else(|| format!("x{k}"), |s| s.to_string()))
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Inputs(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Inputs(format!("{}: {e}", path.display()))
}

/// A file and its content hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(dir: &Path, name: &str) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            sha256: sha256_file(&dir.join(name))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

pub fn grid_spec(grid: &Grid) -> Vec<AxisSpec> {
    grid.axes()
        .iter()
        .map(|a| AxisSpec {
            start: a.start,
            step: a.step,
            len: a.len,
        })
        .collect()
}

pub fn grid_from_spec(spec: &[AxisSpec]) -> Result<Grid> {
    Ok(Grid::new(
        spec.iter()
            .map(|a| Axis {
                start: a.start,
                step: a.step,
                len: a.len,
            })
            .collect(),
    )?)
}

fn fidelity_from_str(s: &str) -> Result<Fidelity> {
    match s {
        "high" => Ok(Fidelity::High),
        "low" => Ok(Fidelity::Low),
        "bifidelity" => Ok(Fidelity::Bifidelity),
        _ => Err(Error::Inputs(format!("unknown fidelity tag '{s}'"))),
    }
}

/// `manifest.json` of an ensemble directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub schema_version: u32,
    pub version: String,
    pub problem: String,
    pub fidelity: String,
    pub seed: u64,
    pub config_sha256: String,
    pub grid: Vec<AxisSpec>,
    pub members: usize,
    /// Parameter sample `z^m` of each member.
    pub params: Vec<Vec<f64>>,
    /// Time integrators actually used (KS only).
    #[serde(default)]
    pub integrators: Vec<String>,
    pub files: Vec<FileEntry>,
}

/// Writes one CSV per member and the manifest.
pub fn write_ensemble(
    dir: &Path,
    e: &Ensemble,
    problem: &str,
    seed: u64,
    config_sha256: &str,
    integrators: &[String],
) -> Result<EnsembleManifest> {
    create_dir(dir)?;
    let width = e.len().saturating_sub(1).to_string().len().max(4);
    let mut files = Vec::with_capacity(e.len());
    for (m, u) in e.members().iter().enumerate() {
        let name = format!("member_{m:0width$}.csv");
        write_field_csv(&dir.join(&name), e.grid(), &[("value", u)])?;
        files.push(FileEntry::of(dir, &name)?);
    }
    let manifest = EnsembleManifest {
        schema_version: SCHEMA_VERSION,
        version: VERSION.to_string(),
        problem: problem.to_string(),
        fidelity: e.fidelity().as_str().to_string(),
        seed,
        config_sha256: config_sha256.to_string(),
        grid: grid_spec(e.grid()),
        members: e.len(),
        params: e.params().to_vec(),
        integrators: integrators.to_vec(),
        files,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Reads an ensemble directory, checking hashes and grid coordinates.
pub fn read_ensemble(dir: &Path) -> Result<(Ensemble, EnsembleManifest)> {
    let manifest: EnsembleManifest = read_json(&dir.join(MANIFEST))?;
    let grid = grid_from_spec(&manifest.grid)?;
    if manifest.files.len() != manifest.members || manifest.params.len() != manifest.members {
        return Err(Error::Inputs(format!(
            "{}: manifest lists {} members but {} files and {} parameter samples",
            dir.display(),
            manifest.members,
            manifest.files.len(),
            manifest.params.len()
        )));
    }
    let mut members = Vec::with_capacity(manifest.members);
    for f in &manifest.files {
        let path = dir.join(&f.name);
        let hash = sha256_file(&path)?;
        if hash != f.sha256 {
            return Err(Error::Inputs(format!("{}: content hash mismatch", path.display())));
        }
        let (_, cols) = read_field_csv(&path, &grid)?;
        members.push(cols.into_iter().next().unwrap_or_default());
    }
    let fidelity = fidelity_from_str(&manifest.fidelity)?;
    let e = Ensemble::new(grid, members, manifest.params.clone(), fidelity)?;
    Ok((e, manifest))
}

/// Header of coordinate names then one column per field; rows in grid order.
pub fn write_field_csv(path: &Path, grid: &Grid, columns: &[(&str, &[f64])]) -> Result<()> {
    for (name, v) in columns {
        if v.len() != grid.len() {
            return Err(Error::Inputs(format!(
                "column '{name}' has {} values for {} grid nodes",
                v.len(),
                grid.len()
            )));
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = coord_names(grid.dim());
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid.point(i).iter().map(|v| v.to_string()).collect();
        row.extend(columns.iter().map(|(_, v)| v[i].to_string()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Inputs(format!("{}:{line}: '{s}' is not a number", path.display())))
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|s| parse_f64(path, k + 2, s))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a field CSV laid out on `grid`; returns the value column names and
/// columns. Coordinates must match the grid nodes in order.
pub fn read_field_csv(path: &Path, grid: &Grid) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (header, rows) = read_rows(path)?;
    let d = grid.dim();
    if header.len() <= d {
        return Err(Error::Inputs(format!("{}: no value column", path.display())));
    }
    if rows.len() != grid.len() {
        return Err(Error::Inputs(format!(
            "{}: {} rows for {} grid nodes",
            path.display(),
            rows.len(),
            grid.len()
        )));
    }
    let mut cols = vec![Vec::with_capacity(rows.len()); header.len() - d];
    for (i, row) in rows.iter().enumerate() {
        let p = grid.point(i);
        if row.len() != header.len() || row[..d].iter().zip(&p).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::Inputs(format!(
                "{}: row {} does not match grid node {p:?}",
                path.display(),
                i + 2
            )));
        }
        for (c, v) in cols.iter_mut().zip(&row[d..]) {
            c.push(*v);
        }
    }
    Ok((header[d..].to_vec(), cols))
}

/// Columns: coordinates, then `value`.
pub fn write_observations(path: &Path, obs: &Observations) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = coord_names(obs.dim());
    header.push("value".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (x, y) in obs.locations().iter().zip(obs.values()) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(y.to_string());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_observations(path: &Path) -> Result<Observations> {
    let (header, rows) = read_rows(path)?;
    if header.len() < 2 {
        return Err(Error::Inputs(format!(
            "{}: expected coordinate columns and a value column",
            path.display()
        )));
    }
    let d = header.len() - 1;
    let mut locations = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != d + 1 {
            return Err(Error::Inputs(format!("{}: ragged row", path.display())));
        }
        locations.push(row[..d].to_vec());
        values.push(row[d]);
    }
    Ok(Observations::new(locations, values)?)
}

/// `None` for non-finite values, which JSON cannot carry.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntryJson {
    pub name: String,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub ratio: Option<f64>,
    pub holds: bool,
    pub informational: bool,
}

impl From<&BoundEntry> for BoundEntryJson {
    fn from(e: &BoundEntry) -> Self {
        Self {
            name: e.name.clone(),
            lhs: finite(e.lhs),
            rhs: finite(e.rhs),
            ratio: finite(e.ratio),
            holds: e.holds,
            informational: e.informational,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReportJson {
    pub schema_version: u32,
    pub m: usize,
    pub n: usize,
    pub delta1: f64,
    pub delta2: f64,
    pub sigma_h_gamma: f64,
    pub sigma_b_gamma: f64,
    pub s_h: f64,
    pub s_b: f64,
    pub delta_cap_h: f64,
    pub delta_cap_b: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub inv_norm_h: Option<f64>,
    pub inv_norm_b: Option<f64>,
    pub ridge: f64,
    pub all_hold: bool,
    pub entries: Vec<BoundEntryJson>,
}

impl From<&BoundReport> for BoundReportJson {
    fn from(r: &BoundReport) -> Self {
        let k = &r.constants;
        Self {
            schema_version: SCHEMA_VERSION,
            m: k.m,
            n: k.n,
            delta1: k.delta1,
            delta2: k.delta2,
            sigma_h_gamma: k.sigma_h_gamma,
            sigma_b_gamma: k.sigma_b_gamma,
            s_h: k.s_h,
            s_b: k.s_b,
            delta_cap_h: k.delta_cap_h,
            delta_cap_b: k.delta_cap_b,
            c1: finite(r.c1),
            c2: finite(r.c2),
            c3: finite(r.c3),
            inv_norm_h: finite(r.inv_norm_h),
            inv_norm_b: finite(r.inv_norm_b),
            ridge: r.ridge,
            all_hold: r.all_hold(),
            entries: r.entries.iter().map(BoundEntryJson::from).collect(),
        }
    }
}

/// `manifest.json` of a command's output directory. Holds only
/// deterministic content; wall-clock accounting goes to `timing.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub version: String,
    pub command: String,
    pub problem: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Time integrators actually used (KS only).
    pub integrators: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    /// Hashes `names` (relative to `dir`) and writes the manifest there.
    pub fn write(
        dir: &Path,
        command: &str,
        problem: &str,
        seed: u64,
        config_sha256: &str,
        integrators: Vec<String>,
        names: &[String],
    ) -> Result<Self> {
        let files = names
            .iter()
            .map(|n| FileEntry::of(dir, n))
            .collect::<Result<Vec<_>>>()?;
        let m = Self {
            schema_version: SCHEMA_VERSION,
            version: VERSION.to_string(),
            command: command.to_string(),
            problem: problem.to_string(),
            seed,
            config_sha256: config_sha256.to_string(),
            integrators,
            files,
        };
        write_json(&dir.join(MANIFEST), &m)?;
        Ok(m)
    }
}

/// Wall-clock cost accounting per fidelity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Mean seconds per high-fidelity run, `C_H`.
    pub high_cost: Option<f64>,
    /// Mean seconds per low-fidelity run, `C_L`.
    pub low_cost: Option<f64>,
    pub high_runs: usize,
    pub low_runs: usize,
    /// Seconds spent on selection, lifting and statistics.
    pub bifidelity_overhead: Option<f64>,
    pub predicted_ratio: Option<f64>,
    pub measured_ratio: Option<f64>,
    pub total_seconds: f64,
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_names() {
        assert_eq!(coord_names(2), vec!["x", "y"]);
        assert_eq!(coord_names(4)[3], "x3");
    }

    #[test]
    fn non_finite_values_become_null() {
        let e = BoundEntry::new("t", 1.0, 0.0);
        let j = serde_json::to_string(&BoundEntryJson::from(&e)).unwrap();
        assert!(j.contains("\"ratio\":null"));
        let back: BoundEntryJson = serde_json::from_str(&j).unwrap();
        assert_eq!(back.ratio, None);
    }
}
