//! Orbitals → Slater state → boundary weights → sector graph → spectrum,
//! with the optional oracle comparison and density.

use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use tonks_core::oracle::{diagonalize, slope_fit, EdConfig};
use tonks_core::spectrum::{EnergyExpansion, SectorSolution, SymmetryClass};
use tonks_core::{all_gammas, laplacian, solve_sectors, SectorGraph, SectorWavefunction, Slater64, SlaterState};

use crate::record::{
    DensityRecord, Expansion, Input, Ordering, Provenance, Record, SlaterRecord, SpectrumRecord, Units,
    ValidationRecord, ValidationRow, SCHEMA_VERSION,
};
use crate::settings::{Command, DensityJob, Job, ValidateJob};

/// A finished run; `all_pass` is false only when a validation band failed.
pub struct Outcome {
    pub record: Record,
    pub all_pass: bool,
}

fn spectrum_record(graph: &SectorGraph, state: &Slater64, sol: &SectorSolution<f64>) -> SpectrumRecord {
    let p = &sol.projected;
    let mut labels = vec![SymmetryClass::Mixed; p.len()];
    for g in &p.groups {
        for i in g.indices() {
            labels[i] = g.class.unwrap_or(SymmetryClass::Mixed);
        }
    }
    let hexagon_order = graph.hexagon_order().map(|tour| Ordering {
        sectors: tour.iter().map(|&s| graph.label(s)).collect(),
        amplitudes: p.vectors.iter().map(|v| tour.iter().map(|&s| v[s]).collect()).collect(),
    });
    SpectrumRecord {
        sectors: (0..graph.len()).map(|s| graph.label(s)).collect(),
        full: sol.full.as_ref().map(|f| f.values.clone()),
        full_groups: sol.full.as_ref().map(|f| f.groups.clone()),
        projected: p.values.clone(),
        groups: p.groups.clone(),
        labels,
        amplitudes: p.vectors.clone(),
        hexagon_order,
        expansion: Expansion {
            form: "E = E_F - K/g",
            validity: EnergyExpansion::<f64>::VALIDITY,
            e_f: state.energy(),
            slopes: p.values.clone(),
        },
    }
}

fn validation(job: &Job, v: &ValidateJob, predicted: &[f64]) -> Result<ValidationRecord> {
    let mut cfg = EdConfig::new(job.particles, v.n_max, v.couplings.clone());
    cfg.components = job.components.clone();
    cfg.states = predicted.len();
    let fine = diagonalize(&cfg).context("exact diagonalization")?;
    let coarse_n_max = v.n_max.checked_sub(4).filter(|&m| m >= job.particles + 2);
    let coarse = match coarse_n_max {
        Some(m) => {
            let mut c = cfg.clone();
            c.n_max = m;
            Some(diagonalize(&c).context("exact diagonalization (coarse basis)")?)
        }
        None => None,
    };
    let mut fits = (0..predicted.len())
        .map(|s| slope_fit(&fine, s, coarse.as_ref()))
        .collect::<tonks_core::Result<Vec<_>>>()?;
    fits.sort_by(|a, b| a.k.total_cmp(&b.k));
    let k_max = predicted.iter().copied().fold(0.0, f64::max);
    let states: Vec<ValidationRow> = predicted
        .iter()
        .zip(&fits)
        .enumerate()
        .map(|(index, (&k, fit))| {
            // a vanishing prediction is judged against the scale of the spectrum
            let allowed = if k > 1e-9 * k_max.max(1.0) { v.band * k } else { v.band * k_max };
            ValidationRow {
                index,
                predicted: k,
                fitted: fit.k,
                uncertainty: fit.half_width,
                standard_error: fit.standard_error,
                truncation: fit.truncation,
                band: allowed,
                pass: (fit.k - k).abs() <= allowed,
            }
        })
        .collect();
    let all_pass = states.iter().all(|r| r.pass);
    Ok(ValidationRecord {
        n_max: v.n_max,
        coarse_n_max,
        dimension: fine.dimension,
        couplings: v.couplings.clone(),
        band: v.band,
        states,
        all_pass,
    })
}

fn density(
    graph: &SectorGraph,
    state: &Slater64,
    sol: &SectorSolution<f64>,
    d: &DensityJob,
) -> Result<DensityRecord> {
    let amplitudes = sol.projected.vectors[d.state].clone();
    let psi = SectorWavefunction::new(state, graph, amplitudes)?;
    let profile = psi.one_body_density(d.target, &d.config())?;
    Ok(DensityRecord {
        state: d.state,
        k: sol.projected.values[d.state],
        target: d.target,
        integral: profile.integral(),
        centers: profile.centers,
        values: profile.values,
        errors: profile.errors,
    })
}

pub fn run(job: &Job, timestamp: bool) -> Result<Outcome> {
    let n = job.particles;
    let source = job
        .trap
        .orbitals(n + job.level, job.orbital_options)
        .context("single-particle orbitals")?;
    let state = SlaterState::make_level(source, job.level, n).context("Slater state")?;
    let gammas = all_gammas(&state, &job.integration).context("boundary weights")?;

    let mut spectrum = None;
    let mut validation_record = None;
    let mut density_record = None;
    if job.command != Command::Gamma {
        let graph = SectorGraph::build(n, job.components.clone())?;
        let weights: Vec<f64> = gammas.iter().map(|w| w.value).collect();
        let l = laplacian(&graph, &weights)?;
        let sol = solve_sectors(&graph, &l)?;
        if let Some(v) = &job.validate {
            validation_record = Some(validation(job, v, &sol.projected.values)?);
        }
        if let Some(d) = &job.density {
            density_record = Some(density(&graph, &state, &sol, d)?);
        }
        spectrum = Some(spectrum_record(&graph, &state, &sol));
    }
    let all_pass = validation_record.as_ref().is_none_or(|v| v.all_pass);

    let timestamp_unix = if timestamp {
        Some(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
    } else {
        None
    };
    let record = Record {
        schema_version: SCHEMA_VERSION,
        units: Units::HARMONIC,
        input: Input {
            command: job.command.name(),
            trap: job.trap_label.clone(),
            particles: n,
            components: job.components.sizes().to_vec(),
            level: job.level,
            integration: job.integration.clone(),
            validate: job.validate.clone(),
            density: job.density.clone(),
        },
        slater: SlaterRecord {
            occupation: state.occupation().to_vec(),
            orbital_energies: state.orbital_energies().to_vec(),
            e_f: state.energy(),
        },
        gammas,
        spectrum,
        validation: validation_record,
        density: density_record,
        provenance: Provenance {
            tool: "tonks",
            version: env!("CARGO_PKG_VERSION"),
            core_version: tonks_core::VERSION,
            seed: job.integration.seed,
            samples: job.integration.samples,
            shards: job.integration.shards,
            quad_tolerance: job.integration.quad_tolerance,
            mc_tolerance: job.integration.mc_tolerance,
            orbital_tolerance: job.orbital_options.tolerance,
            margin: job.orbital_options.margin,
            timestamp_unix,
        },
    };
    Ok(Outcome { record, all_pass })
}
