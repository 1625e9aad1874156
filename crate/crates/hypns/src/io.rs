//! Artifact output: atomic writes, key-sorted pretty JSON, CSV tables and
//! binary field snapshots.
//!
//! Snapshot layout (little-endian): magic `HYPNSF01`, u32 component count,
//! u64 n_r, u64 n_theta, f64 R_max, then each component as n_r · n_theta f64
//! values, row-major in (ring j, angle m). Vector fields store the frame
//! components (e_r, e_θ).

use crate::grid::{Grid, ScalarField, VectorField};
use crate::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const MAGIC: &[u8; 8] = b"HYPNSF01";
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8;

/// Write to a temporary sibling, sync, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().ok_or_else(|| Error::Format(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort_keys).collect()),
        x => x,
    }
}

/// Pretty UTF-8 JSON with object keys sorted at every level.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&sort_keys(v)).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}

/// CSV with a header taken from the row type's field names.
pub fn to_csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, &to_csv_bytes(rows)?)
}

/// CSV from an explicit header and numeric rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header).map_err(fmt)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::Format(format!("row has {} values, header has {}", r.len(), header.len())));
        }
        w.write_record(r.iter().map(|x| x.to_string())).map_err(fmt)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
}

/// Two numeric columns of a CSV file as (time, value) pairs.
pub fn read_series(path: &Path, time_column: &str, column: &str) -> Result<Vec<(f64, f64)>> {
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    let mut r = csv::Reader::from_path(path).map_err(fmt)?;
    let header = r.headers().map_err(fmt)?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Format(format!("{}: no column {name:?}", path.display())))
    };
    let (it, iv) = (find(time_column)?, find(column)?);
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(fmt)?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("{}: bad number in data row {}", path.display(), k + 1)))
        };
        out.push((num(it)?, num(iv)?));
    }
    Ok(out)
}

/// Run metadata. Timestamps live only here so the CSV outputs stay byte-reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub campaign: String,
    pub version: String,
    pub unix_time: u64,
    pub seed: u64,
    pub threads: usize,
    pub args: Vec<String>,
    pub exit_code: i32,
    pub artifacts: Vec<String>,
}

impl Metadata {
    pub fn now(campaign: &str, seed: u64, threads: usize) -> Self {
        let unix_time = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            campaign: campaign.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            unix_time,
            seed,
            threads,
            args: std::env::args().collect(),
            exit_code: 0,
            artifacts: Vec::new(),
        }
    }
}

/// A field on the polar grid, one or two components.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_r: usize,
    pub n_theta: usize,
    pub r_max: f64,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_scalar(f: &ScalarField) -> Self {
        let g = &f.grid;
        Self { n_r: g.n_r, n_theta: g.n_theta, r_max: g.r_max, components: vec![f.values.clone()] }
    }

    pub fn from_vector(u: &VectorField) -> Self {
        let g = &u.grid;
        let (a, b) = u.frame();
        Self { n_r: g.n_r, n_theta: g.n_theta, r_max: g.r_max, components: vec![a, b] }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.r_max, self.n_r, self.n_theta)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n_r * self.n_theta;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * self.components.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.components.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_r as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_theta as u64).to_le_bytes());
        out.extend_from_slice(&self.r_max.to_le_bytes());
        for c in &self.components {
            for x in c {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("snapshot: {m}"));
        if b.len() < HEADER_LEN || &b[..8] != MAGIC {
            return Err(bad("missing header"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes"));
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().expect("8 bytes"));
        let nc = u32_at(8) as usize;
        let n_r = u64_at(12) as usize;
        let n_theta = u64_at(20) as usize;
        let r_max = f64::from_le_bytes(b[28..36].try_into().expect("8 bytes"));
        let n = n_r.checked_mul(n_theta).ok_or_else(|| bad("dimensions overflow"))?;
        if b.len() != HEADER_LEN + 8 * n * nc {
            return Err(bad("payload length does not match the header"));
        }
        let mut components = Vec::with_capacity(nc);
        for c in 0..nc {
            let base = HEADER_LEN + 8 * n * c;
            components.push((0..n).map(|i| f64::from_le_bytes(b[base + 8 * i..base + 8 * i + 8].try_into().expect("8 bytes"))).collect());
        }
        Ok(Self { n_r, n_theta, r_max, components })
    }

    /// Columns j, m, r, theta, then c0, c1, ...
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let g = self.grid()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        let mut header = vec!["j".to_string(), "m".into(), "r".into(), "theta".into()];
        header.extend((0..self.components.len()).map(|c| format!("c{c}")));
        w.write_record(&header).map_err(fmt)?;
        for j in 0..self.n_r {
            for m in 0..self.n_theta {
                let i = g.idx(j, m);
                let mut rec = vec![j.to_string(), m.to_string(), g.r[j].to_string(), g.theta(m).to_string()];
                rec.extend(self.components.iter().map(|c| c[i].to_string()));
                w.write_record(&rec).map_err(fmt)?;
            }
        }
        w.into_inner().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, bin: &Path, csv: Option<&Path>) -> Result<()> {
        write_atomic(bin, &self.to_bytes())?;
        if let Some(c) = csv {
            write_atomic(c, &self.to_csv()?)?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
