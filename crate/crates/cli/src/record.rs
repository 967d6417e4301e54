//! The serialized result record and its JSON and CSV writers.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tonks_core::spectrum::{DegeneracyGroup, DensityTarget};
use tonks_core::{BoundaryWeight, IntegrationConfig, SymmetryClass};

use crate::settings::{DensityJob, Format, ValidateJob};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize)]
pub struct Units {
    pub convention: &'static str,
    pub energy: &'static str,
    pub length: &'static str,
    pub coupling: &'static str,
}

impl Units {
    pub const HARMONIC: Units = Units {
        convention: "hbar = m = omega = 1",
        energy: "hbar*omega",
        length: "sqrt(hbar/(m*omega))",
        coupling: "hbar*omega*length",
    };
}

#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub command: &'static str,
    pub trap: String,
    pub particles: usize,
    pub components: Vec<usize>,
    pub level: usize,
    pub integration: IntegrationConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateJob>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityJob>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlaterRecord {
    pub occupation: Vec<usize>,
    pub orbital_energies: Vec<f64>,
    #[serde(rename = "E_F")]
    pub e_f: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ordering {
    pub sectors: Vec<String>,
    pub amplitudes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Expansion {
    pub form: &'static str,
    pub validity: &'static str,
    #[serde(rename = "E_F")]
    pub e_f: f64,
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRecord {
    /// Sector labels in canonical order; entry `i` lists particles left to right.
    pub sectors: Vec<String>,
    pub full: Option<Vec<f64>>,
    pub full_groups: Option<Vec<DegeneracyGroup>>,
    pub projected: Vec<f64>,
    pub groups: Vec<DegeneracyGroup>,
    pub labels: Vec<SymmetryClass>,
    /// Unit sector amplitudes of each projected eigenstate, canonical order.
    pub amplitudes: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hexagon_order: Option<Ordering>,
    pub expansion: Expansion,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationRow {
    pub index: usize,
    pub predicted: f64,
    pub fitted: f64,
    pub uncertainty: f64,
    pub standard_error: f64,
    pub truncation: f64,
    pub band: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationRecord {
    pub n_max: usize,
    pub coarse_n_max: Option<usize>,
    pub dimension: usize,
    pub couplings: Vec<f64>,
    pub band: f64,
    pub states: Vec<ValidationRow>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityRecord {
    pub state: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub target: DensityTarget,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub seed: u64,
    pub samples: u64,
    pub shards: usize,
    pub quad_tolerance: f64,
    pub mc_tolerance: f64,
    pub orbital_tolerance: f64,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub schema_version: &'static str,
    pub units: Units,
    pub input: Input,
    pub slater: SlaterRecord,
    pub gammas: Vec<BoundaryWeight>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityRecord>,
    pub provenance: Provenance,
}

fn class_name(c: SymmetryClass) -> &'static str {
    match c {
        SymmetryClass::Fermi => "fermi",
        SymmetryClass::Bose => "bose",
        SymmetryClass::Mixed => "mixed",
    }
}

/// One table with columns `section,index,value,error,label`.
pub fn to_csv(record: &Record) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "index", "value", "error", "label"])?;
    let num = |x: f64| format!("{x:e}");
    w.write_record(["E_F", "0", &num(record.slater.e_f), "", ""])?;
    for g in &record.gammas {
        let method = serde_json::to_value(g.method)?;
        w.write_record([
            "gamma",
            &g.k.to_string(),
            &num(g.value),
            &num(g.error),
            method.as_str().unwrap_or(""),
        ])?;
    }
    if let Some(s) = &record.spectrum {
        if let (Some(full), Some(groups)) = (&s.full, &s.full_groups) {
            for g in groups {
                for i in g.indices() {
                    let label = g.class.map_or("", class_name);
                    w.write_record(["full", &i.to_string(), &num(full[i]), "", label])?;
                }
            }
        }
        for (i, (&k, &c)) in s.projected.iter().zip(&s.labels).enumerate() {
            w.write_record(["projected", &i.to_string(), &num(k), "", class_name(c)])?;
        }
    }
    if let Some(v) = &record.validation {
        for r in &v.states {
            w.write_record([
                "validation",
                &r.index.to_string(),
                &num(r.fitted),
                &num(r.uncertainty),
                if r.pass { "pass" } else { "fail" },
            ])?;
        }
    }
    if let Some(d) = &record.density {
        for (i, ((&x, &v), &e)) in d.centers.iter().zip(&d.values).zip(&d.errors).enumerate() {
            w.write_record(["density", &i.to_string(), &num(v), &num(e), &num(x)])?;
        }
    }
    Ok(w.into_inner()?)
}

pub fn render(record: &Record, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(record)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => to_csv(record),
    }
}

/// Writes through a temporary file in the target directory and renames it,
/// so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/out.json"), b"x").is_err());
    }
}
