//! Run settings: command-line flags, the optional TOML file, and the
//! validated job they resolve to.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tonks_core::oracle::{EdConfig, MAX_ORBITALS, MIN_FIT_COUPLING};
use tonks_core::sectors::MAX_PARTICLES;
use tonks_core::spectrum::{DensityConfig, DensityTarget};
use tonks_core::{ComponentSpec, IntegrationConfig, Method, SectorGraph, TabulatedOptions, TabulatedPotential, Trap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Gamma,
    Validate,
    Density,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Gamma => "gamma",
            Command::Validate => "validate",
            Command::Density => "density",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Auto,
    Quadrature,
    MonteCarlo,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Quadrature => Method::Quadrature,
            MethodArg::MonteCarlo => Method::MonteCarlo,
        }
    }
}

/// Every tunable of a run. Unset fields fall back to the config file, then to
/// the defaults. Config keys use the flag names.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// `harmonic` or the path of a tabulated potential file.
    #[arg(long)]
    pub trap: Option<String>,
    /// Number of particles.
    #[arg(long)]
    pub n: Option<usize>,
    /// Component sizes, e.g. `2,1`.
    #[arg(long)]
    pub components: Option<String>,
    /// Free-fermion level index (0 is the ground level).
    #[arg(long)]
    pub level: Option<usize>,
    /// Required rise of a tabulated potential above its minimum at the ends.
    #[arg(long)]
    pub margin: Option<f64>,

    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Absolute error target for quadrature.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Absolute standard-error target for Monte Carlo.
    #[arg(long)]
    pub mc_tolerance: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Largest single-particle index (exclusive) of the exact-diagonalization basis.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Couplings for validation, e.g. `20,50,100`.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub couplings: Option<Vec<f64>>,
    /// Relative acceptance band for validation.
    #[arg(long)]
    pub band: Option<f64>,

    /// Projected eigenstate used for densities (ascending K).
    #[arg(long)]
    pub state: Option<usize>,
    /// `all`, `particle:<i>` or `component:<c>` (0-based).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,

    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &Settings) -> Settings {
        overlay!(
            self, top, trap, n, components, level, margin, method, tolerance, mc_tolerance, samples, seed, n_max,
            couplings, band, state, target, lo, hi, bins, output, format
        );
        self
    }
}

/// Reads a config file: top-level keys apply to every subcommand, a table
/// named after the subcommand overrides them.
pub fn load_file(path: &Path, command: Command) -> Result<Settings> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut table: toml::Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    let mut section = None;
    for c in [Command::Spectrum, Command::Gamma, Command::Validate, Command::Density] {
        if let Some(v) = table.remove(c.name()) {
            if c == command {
                section = Some(v);
            } else {
                ensure!(v.is_table(), "config key `{}` must be a table", c.name());
            }
        }
    }
    let base: Settings = toml::Value::Table(table)
        .try_into()
        .with_context(|| format!("in config {}", path.display()))?;
    let over: Settings = match section {
        Some(v) => v
            .try_into()
            .with_context(|| format!("in section [{}] of {}", command.name(), path.display()))?,
        None => Settings::default(),
    };
    Ok(base.overlay(&over))
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateJob {
    pub n_max: usize,
    pub couplings: Vec<f64>,
    pub band: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityJob {
    pub state: usize,
    pub target: DensityTarget,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub samples: u64,
    pub seed: u64,
}

impl DensityJob {
    pub fn config(&self) -> DensityConfig {
        DensityConfig {
            lo: self.lo,
            hi: self.hi,
            bins: self.bins,
            samples: self.samples,
            seed: self.seed,
            ..DensityConfig::default()
        }
    }
}

/// A fully validated run.
#[derive(Debug, Clone)]
pub struct Job {
    pub command: Command,
    pub trap_label: String,
    pub trap: Trap,
    pub particles: usize,
    pub components: ComponentSpec,
    pub level: usize,
    pub orbital_options: TabulatedOptions,
    pub integration: IntegrationConfig,
    pub validate: Option<ValidateJob>,
    pub density: Option<DensityJob>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

fn parse_target(text: &str) -> Result<DensityTarget> {
    let text = text.trim();
    if text == "all" {
        return Ok(DensityTarget::All);
    }
    let (kind, idx) = text
        .split_once(':')
        .with_context(|| format!("density target `{text}`: expected all, particle:<i> or component:<c>"))?;
    let i: usize = idx.trim().parse().with_context(|| format!("density target index `{idx}`"))?;
    match kind.trim() {
        "particle" => Ok(DensityTarget::Particle(i)),
        "component" => Ok(DensityTarget::Component(i)),
        other => bail!("density target kind `{other}`: expected particle or component"),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    ensure!(v.is_finite() && v > 0.0, "{name} must be positive and finite, got {v}");
    Ok(v)
}

/// Checks every field against module preconditions before any computation.
pub fn resolve(command: Command, s: Settings) -> Result<Job> {
    let particles = s.n.context("particle number not set (use --n or `n` in the config)")?;
    ensure!(
        (2..=MAX_PARTICLES).contains(&particles),
        "particle number {particles} outside 2..={MAX_PARTICLES}"
    );
    let components = match &s.components {
        Some(text) => ComponentSpec::parse(text)?,
        None => ComponentSpec::distinguishable(particles),
    };
    components.check(particles)?;
    let level = s.level.unwrap_or(0);

    let defaults = TabulatedOptions::default();
    let orbital_options = TabulatedOptions {
        margin: positive("margin", s.margin.unwrap_or(defaults.margin))?,
        ..defaults
    };
    let trap_text = s.trap.clone().unwrap_or_else(|| "harmonic".into());
    let trap = if trap_text == "harmonic" {
        Trap::harmonic()
    } else {
        let path = Path::new(&trap_text);
        ensure!(path.is_file(), "trap file {} does not exist", path.display());
        let p = TabulatedPotential::read(path).with_context(|| format!("reading trap file {}", path.display()))?;
        p.check_confining(orbital_options.margin)?;
        Trap::Tabulated(p)
    };

    let base = IntegrationConfig::default();
    let samples = s.samples.unwrap_or(base.samples);
    ensure!(samples >= 2, "samples must be at least 2, got {samples}");
    let integration = IntegrationConfig {
        method: s.method.map_or(base.method, Method::from),
        quad_tolerance: positive("tolerance", s.tolerance.unwrap_or(base.quad_tolerance))?,
        mc_tolerance: positive("mc-tolerance", s.mc_tolerance.unwrap_or(base.mc_tolerance))?,
        samples,
        seed: s.seed.unwrap_or(base.seed),
        ..base
    };

    let validate = if command == Command::Validate {
        ensure!(particles <= 3, "validation supports 2 or 3 particles, got {particles}");
        ensure!(matches!(trap, Trap::Harmonic { .. }), "validation requires the harmonic trap");
        ensure!(level == 0, "validation requires level 0, got {level}");
        let n_max = s.n_max.unwrap_or(if particles == 2 { 40 } else { 14 });
        ensure!(n_max <= MAX_ORBITALS, "n-max {n_max} exceeds {MAX_ORBITALS}");
        let couplings = s
            .couplings
            .clone()
            .unwrap_or_else(|| if particles == 2 { vec![20.0, 50.0, 100.0] } else { vec![25.0, 50.0, 100.0] });
        let band = positive("band", s.band.unwrap_or(if particles == 2 { 0.05 } else { 0.10 }))?;
        let mut ed = EdConfig::new(particles, n_max, couplings.clone());
        ed.components = components.clone();
        ed.validate()?;
        let usable = couplings.iter().filter(|&&g| g >= MIN_FIT_COUPLING).count();
        ensure!(
            usable >= 3,
            "slope fits need at least 3 couplings >= {MIN_FIT_COUPLING}, got {usable}"
        );
        Some(ValidateJob { n_max, couplings, band })
    } else {
        None
    };

    let density = if command == Command::Density {
        let d = DensityConfig::default();
        let target = parse_target(s.target.as_deref().unwrap_or("all"))?;
        match target {
            DensityTarget::Particle(p) => ensure!(p < particles, "particle {p} out of range for {particles}"),
            DensityTarget::Component(c) => ensure!(
                c < components.sizes().len(),
                "component {c} out of range for spec {components}"
            ),
            DensityTarget::All => {}
        }
        let (lo, hi) = (s.lo.unwrap_or(d.lo), s.hi.unwrap_or(d.hi));
        ensure!(lo.is_finite() && hi.is_finite() && hi > lo, "density grid needs lo < hi, got [{lo}, {hi}]");
        let bins = s.bins.unwrap_or(d.bins);
        ensure!(bins > 0, "bins must be positive");
        let state = s.state.unwrap_or(0);
        let dim = SectorGraph::build(particles, components.clone())?.projection_dim();
        ensure!(state < dim, "state {state} out of range: the projected problem has {dim} states");
        Some(DensityJob {
            state,
            target,
            lo,
            hi,
            bins,
            samples,
            seed: integration.seed,
        })
    } else {
        None
    };

    Ok(Job {
        command,
        trap_label: trap_text,
        trap,
        particles,
        components,
        level,
        orbital_options,
        integration,
        validate,
        density,
        output: s.output.clone(),
        format: s.format.unwrap_or_default(),
    })
}
