//! The strong-coupling eigenproblem `L a = K a` and what follows from it.
//!
//! For each eigenpair the energy near the hard-core limit is
//! `E(g) = E_F − K/g + o(1/g)`.

use serde::{Deserialize, Serialize};
use statrs::statistics::Distribution as _;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, symmetric_eigen, SquareMatrix};
use crate::mc::run_shards;
use crate::num::Real;
use crate::sectors::{apply_laplacian, SectorGraph, SectorLaplacian};
use crate::slater::SlaterState;

/// Relative asymmetry tolerated in the input matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Groups eigenvalues with `|K_i − K_j| ≤ DEGENERACY_TOLERANCE · max(K, 1)`.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryClass {
    /// Amplitudes all equal: Ψ = Ψ_F, totally antisymmetric, K = 0.
    Fermi,
    /// Amplitudes `∝ sgn(σ)`: Ψ = ±|Ψ_F|, totally symmetric, maximal K.
    Bose,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyGroup {
    /// Index of the first member in the spectrum.
    pub start: usize,
    pub len: usize,
    pub value: f64,
    pub class: Option<SymmetryClass>,
    /// Number of independent states in the group that lie in the component subspace.
    pub component_states: Option<usize>,
}

impl DegeneracyGroup {
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Eigenvalues ascending, orthonormal eigenvectors, degeneracy groups.
#[derive(Debug, Clone)]
pub struct KSpectrum<T: Real> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    pub groups: Vec<DegeneracyGroup>,
}

fn group_ranges<T: Real>(values: &[T]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let v = v.to_f64_lossy();
        match out.last_mut() {
            Some((start, len))
                if (v - values[*start].to_f64_lossy()).abs()
                    <= DEGENERACY_TOLERANCE * v.abs().max(1.0) =>
            {
                *len += 1
            }
            _ => out.push((i, 1)),
        }
    }
    out
}

/// Replaces the vectors of one group by a deterministic orthonormal basis of
/// the same subspace: project unit vectors in index order, keep the first
/// whose residual norm is at least half the largest one, repeat.
fn canonicalize<T: Real>(vectors: &mut [Vec<T>]) {
    let m = vectors.len();
    let n = vectors[0].len();
    // ‖Q e_i‖² = Σ_v v_i²; removing accepted u ∈ range(Q) subtracts u_i².
    let mut residual: Vec<T> = (0..n)
        .map(|i| vectors.iter().map(|v| v[i] * v[i]).sum())
        .collect();
    let mut accepted: Vec<Vec<T>> = Vec::with_capacity(m);
    while accepted.len() < m {
        let best = residual.iter().copied().fold(T::zero(), T::max);
        let pick = residual
            .iter()
            .position(|&r| r >= T::lit(0.25) * best)
            .expect("group subspace is nonempty");
        let mut w = vec![T::zero(); n];
        for v in vectors.iter() {
            let c = v[pick];
            for (wj, &vj) in w.iter_mut().zip(v) {
                *wj = *wj + c * vj;
            }
        }
        for u in &accepted {
            let c = dot(u, &w);
            for (wj, &uj) in w.iter_mut().zip(u) {
                *wj = *wj - c * uj;
            }
        }
        let inv = T::one() / norm(&w);
        let u: Vec<T> = w.into_iter().map(|x| x * inv).collect();
        for (r, &ui) in residual.iter_mut().zip(&u) {
            *r = *r - ui * ui;
        }
        residual[pick] = T::zero();
        accepted.push(u);
    }
    for (v, a) in vectors.iter_mut().zip(accepted) {
        *v = a;
    }
}

impl<T: Real> KSpectrum<T> {
    /// Diagonalizes a symmetric `L`.
    pub fn solve(l: &SquareMatrix<T>) -> Result<Self> {
        let scale = l.max_abs().max(T::one());
        let asym = l.asymmetry();
        if asym > T::lit(SYMMETRY_TOLERANCE) * scale {
            return Err(Error::NonSymmetric(asym.to_f64_lossy()));
        }
        let eig = symmetric_eigen(l)?;
        let lnorm = l.norm().max(T::one());
        let eps = T::lit(RESIDUAL_TOLERANCE.max(T::epsilon().to_f64_lossy() * 1e3));
        for (k, v) in eig.values.iter().zip(&eig.vectors) {
            let lv = l.matvec(v);
            let r: Vec<T> = lv.iter().zip(v).map(|(&a, &b)| a - *k * b).collect();
            let res = norm(&r);
            if res > eps * lnorm {
                return Err(Error::EigenNotConverged {
                    residual: res.to_f64_lossy(),
                });
            }
        }
        let floor = T::lit(1e3) * T::epsilon() * scale;
        let values: Vec<T> = eig
            .values
            .into_iter()
            .map(|k| if k.abs() <= floor { T::zero() } else { k })
            .collect();
        let mut vectors = eig.vectors;
        let groups = group_ranges(&values)
            .into_iter()
            .map(|(start, len)| {
                canonicalize(&mut vectors[start..start + len]);
                let mean: f64 = values[start..start + len]
                    .iter()
                    .map(|v| v.to_f64_lossy())
                    .sum::<f64>()
                    / len as f64;
                DegeneracyGroup {
                    start,
                    len,
                    value: mean,
                    class: None,
                    component_states: None,
                }
            })
            .collect();
        Ok(Self {
            values,
            vectors,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Orthogonal projector onto the eigenspace of group `g`.
    pub fn projector(&self, g: usize) -> SquareMatrix<T> {
        let n = self.vectors[0].len();
        let group = &self.groups[g];
        SquareMatrix::from_fn(n, |i, j| {
            group
                .indices()
                .map(|k| self.vectors[k][i] * self.vectors[k][j])
                .sum()
        })
    }

    /// Labels every group by its overlap with the uniform vector, the sign
    /// vector, and the component subspace of `graph`. Vectors must be over
    /// all `N!` sectors.
    pub fn classify(mut self, graph: &SectorGraph) -> Self {
        let n = graph.len();
        assert_eq!(self.vectors[0].len(), n, "classify needs sector-space vectors");
        let c = T::one() / T::from_usize_lossy(n).sqrt();
        let ones = vec![c; n];
        let signs: Vec<T> = (0..n)
            .map(|s| if graph.sign(s) > 0 { c } else { -c })
            .collect();
        let basis = graph.projection_basis();
        for group in &mut self.groups {
            let weight = |u: &[T]| -> f64 {
                group
                    .indices()
                    .map(|k| dot(&self.vectors[k], u).to_f64_lossy().powi(2))
                    .sum()
            };
            let near_one = 1.0 - 1e-6;
            group.class = Some(if weight(&ones) >= near_one {
                SymmetryClass::Fermi
            } else if weight(&signs) >= near_one {
                SymmetryClass::Bose
            } else {
                SymmetryClass::Mixed
            });
            let inside: f64 = group
                .indices()
                .map(|k| {
                    basis
                        .iter()
                        .map(|col| {
                            col.iter()
                                .map(|&(s, b)| b * self.vectors[k][s].to_f64_lossy())
                                .sum::<f64>()
                                .powi(2)
                        })
                        .sum::<f64>()
                })
                .sum();
            group.component_states = Some(inside.round() as usize);
        }
        self
    }
}

/// Spectra of the full and the component-projected problem. Projected
/// eigenvectors are lifted back to sector amplitudes.
#[derive(Debug, Clone)]
pub struct SectorSolution<T: Real> {
    pub full: Option<KSpectrum<T>>,
    pub projected: KSpectrum<T>,
}

pub fn solve_sectors<T: Real>(
    graph: &SectorGraph,
    laplacian: &SectorLaplacian<T>,
) -> Result<SectorSolution<T>> {
    let full = match laplacian.full() {
        Some(l) => Some(KSpectrum::solve(l)?.classify(graph)),
        None => None,
    };
    let mut projected = KSpectrum::solve(laplacian.projected())?;
    projected.vectors = projected
        .vectors
        .iter()
        .map(|coords| graph.lift(coords))
        .collect();
    Ok(SectorSolution {
        full,
        projected: projected.classify(graph),
    })
}

/// `K(a) = Σ_edges γ_k (a_σ − a_τ)² / Σ_σ a_σ²`.
pub fn rayleigh_quotient<T: Real>(graph: &SectorGraph, weights: &[T], a: &[T]) -> T {
    let num: T = graph
        .edges()
        .iter()
        .map(|e| {
            let d = a[e.a] - a[e.b];
            weights[e.k - 1] * d * d
        })
        .sum();
    num / dot(a, a)
}

/// `∂K/∂a_σ = 2 [(L a)_σ − K a_σ] / Σ a²`.
pub fn rayleigh_gradient<T: Real>(graph: &SectorGraph, weights: &[T], a: &[T]) -> Vec<T> {
    let k = rayleigh_quotient(graph, weights, a);
    let two_over = T::lit(2.0) / dot(a, a);
    apply_laplacian(graph, weights, a)
        .into_iter()
        .zip(a)
        .map(|(la, &ai)| two_over * (la - k * ai))
        .collect()
}

/// `E(g) = E_F − K/g`, valid to linear order in `1/g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyExpansion<T> {
    pub free_energy: T,
    pub slope: T,
}

impl<T: Real> EnergyExpansion<T> {
    pub const VALIDITY: &'static str = "linear order in 1/g";

    pub fn energy(&self, g: T) -> T {
        self.free_energy - self.slope / g
    }
}

pub fn expansion<T: Real>(state: &SlaterState<T>, spectrum: &KSpectrum<T>) -> Vec<EnergyExpansion<T>> {
    spectrum
        .values
        .iter()
        .map(|&k| EnergyExpansion {
            free_energy: state.energy(),
            slope: k,
        })
        .collect()
}

/// `Ψ(x) = a_{σ(x)} Ψ_F(x)` where `σ(x)` lists the particles in ascending position.
#[derive(Debug, Clone)]
pub struct SectorWavefunction<'a, T: Real> {
    state: &'a SlaterState<T>,
    graph: &'a SectorGraph,
    amplitudes: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "index")]
pub enum DensityTarget {
    /// One particle, 0-based.
    Particle(usize),
    /// All particles of one component, 0-based.
    Component(usize),
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityConfig {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub samples: u64,
    pub seed: u64,
    pub shards: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            bins: 100,
            samples: 1_000_000,
            seed: 20140101,
            shards: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

impl DensityProfile {
    /// Midpoint-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        let w = if self.centers.len() > 1 {
            self.centers[1] - self.centers[0]
        } else {
            0.0
        };
        self.values.iter().sum::<f64>() * w
    }
}

impl<'a, T: Real> SectorWavefunction<'a, T> {
    pub fn new(state: &'a SlaterState<T>, graph: &'a SectorGraph, amplitudes: Vec<T>) -> Result<Self> {
        if state.particles() != graph.particles() {
            return Err(Error::ParticleCount(state.particles()));
        }
        if amplitudes.len() != graph.len() {
            return Err(Error::AmplitudeLength {
                expected: graph.len(),
                got: amplitudes.len(),
            });
        }
        Ok(Self {
            state,
            graph,
            amplitudes,
        })
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    /// Sector of `x`, or `None` when two coordinates coincide.
    pub fn sector_of(&self, x: &[T]) -> Option<usize> {
        let mut order: Vec<u8> = (0..x.len() as u8).collect();
        order.sort_by(|&i, &j| x[i as usize].partial_cmp(&x[j as usize]).unwrap());
        if order.windows(2).any(|w| x[w[0] as usize] == x[w[1] as usize]) {
            return None;
        }
        Some(self.graph.index_of(&order))
    }

    pub fn eval(&self, x: &[T]) -> T {
        match self.sector_of(x) {
            Some(s) => self.amplitudes[s] * self.state.eval(x),
            None => T::zero(),
        }
    }

    /// `p_σ = a_σ² / Σ a²`.
    pub fn sector_probabilities(&self) -> Vec<T> {
        let total = dot(&self.amplitudes, &self.amplitudes);
        self.amplitudes.iter().map(|&a| a * a / total).collect()
    }
}

impl SectorWavefunction<'_, f64> {
    /// One-body density on a uniform grid of bin centres.
    ///
    /// Every sector carries the same |Ψ_F|², so the particle in slot `s` of
    /// any sector has the density `f_s` of the `s`-th order statistic of
    /// |Ψ_F|². The density of particle `p` is `Σ_σ p_σ f_{slot_σ(p)}`. The
    /// `f_s` are estimated by importance sampling from a Gaussian proposal.
    pub fn one_body_density(&self, target: DensityTarget, cfg: &DensityConfig) -> Result<DensityProfile> {
        let n = self.graph.particles();
        let include: Vec<bool> = match target {
            DensityTarget::Particle(p) if p < n => (0..n).map(|q| q == p).collect(),
            DensityTarget::Component(c) if c < self.graph.spec().sizes().len() => {
                (0..n).map(|q| self.graph.spec().component_of(q) == c).collect()
            }
            DensityTarget::All => vec![true; n],
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "density target {target:?} out of range"
                )))
            }
        };
        if !(cfg.hi > cfg.lo) || cfg.bins == 0 || cfg.samples < 2 {
            return Err(Error::InvalidConfig("density grid or sample count invalid".into()));
        }

        // Weight of slot s: Σ_σ p_σ [particle at slot s of σ is included].
        let probs = self.sector_probabilities();
        let mut slot_weight = vec![0.0; n];
        for (s, &p) in probs.iter().enumerate() {
            for (slot, &q) in self.graph.sector(s).iter().enumerate() {
                if include[q as usize] {
                    slot_weight[slot] += p;
                }
            }
        }

        let top = *self.state.occupation().last().unwrap();
        let (lo, hi) = self.state.source().support(top, 1e-12);
        let q = crate::weights::proposal(self.state, lo, hi);
        let (mu, sigma) = (q.mean().unwrap(), q.std_dev().unwrap());
        let width = (cfg.hi - cfg.lo) / cfg.bins as f64;
        let bins = cfg.bins;
        let ln_q = |x: f64| -0.5 * ((x - mu) / sigma).powi(2) - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();

        let shards = run_shards(cfg.samples, cfg.shards, cfg.seed, 0xDE75, |_, range, rng| {
            use rand_distr::{Distribution, StandardNormal};
            let mut sum = vec![0.0; bins];
            let mut sumsq = vec![0.0; bins];
            let mut x = vec![0.0; n];
            let mut local = vec![0.0; bins];
            for _ in range {
                let mut log_q = 0.0;
                for xi in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *xi = mu + sigma * z;
                    log_q += ln_q(*xi);
                }
                let psi = self.state.eval(&x);
                let w = psi * psi * (-log_q).exp();
                x.sort_by(|a, b| a.total_cmp(b));
                local.iter_mut().for_each(|v| *v = 0.0);
                for (slot, &xs) in x.iter().enumerate() {
                    if slot_weight[slot] == 0.0 || xs < cfg.lo || xs >= cfg.hi {
                        continue;
                    }
                    let b = (((xs - cfg.lo) / width) as usize).min(bins - 1);
                    local[b] += slot_weight[slot] * w;
                }
                for b in 0..bins {
                    sum[b] += local[b];
                    sumsq[b] += local[b] * local[b];
                }
            }
            (sum, sumsq)
        });
        let mut sum = vec![0.0; bins];
        let mut sumsq = vec![0.0; bins];
        for (s, s2) in shards {
            for b in 0..bins {
                sum[b] += s[b];
                sumsq[b] += s2[b];
            }
        }
        let m = cfg.samples as f64;
        let values: Vec<f64> = sum.iter().map(|s| s / m / width).collect();
        let errors = sum
            .iter()
            .zip(&sumsq)
            .map(|(s, s2)| {
                let mean = s / m;
                ((s2 / m - mean * mean).max(0.0) / (m - 1.0)).sqrt() / width
            })
            .collect();
        let centers = (0..bins).map(|b| cfg.lo + (b as f64 + 0.5) * width).collect();
        Ok(DensityProfile {
            centers,
            values,
            errors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sectors::{laplacian, ComponentSpec};
    use crate::trap::{HarmonicOscillator, OrbitalSource};
    use std::sync::Arc;

    fn hexagon(gamma: f64) -> (SectorGraph, KSpectrum<f64>) {
        let g = SectorGraph::build(3, ComponentSpec::distinguishable(3)).unwrap();
        let l = laplacian(&g, &[gamma, gamma]).unwrap();
        let k = KSpectrum::solve(l.full().unwrap()).unwrap().classify(&g);
        (g, k)
    }

    #[test]
    fn hexagon_spectrum_and_groups() {
        let gamma = 1.3464301963548;
        let (_, k) = hexagon(gamma);
        let expect = [0.0, 1.0, 1.0, 3.0, 3.0, 4.0];
        for (v, e) in k.values.iter().zip(expect) {
            assert!((v / gamma - e).abs() < 1e-12);
        }
        let sizes: Vec<usize> = k.groups.iter().map(|g| g.len).collect();
        assert_eq!(sizes, vec![1, 2, 2, 1]);
        let classes: Vec<_> = k.groups.iter().map(|g| g.class.unwrap()).collect();
        assert_eq!(
            classes,
            vec![
                SymmetryClass::Fermi,
                SymmetryClass::Mixed,
                SymmetryClass::Mixed,
                SymmetryClass::Bose
            ]
        );
    }

    #[test]
    fn two_particle_spectrum() {
        let g = SectorGraph::build(2, ComponentSpec::distinguishable(2)).unwrap();
        let l = laplacian(&g, &[0.8f64]).unwrap();
        let k = KSpectrum::solve(l.full().unwrap()).unwrap();
        assert_eq!(k.values[0], 0.0);
        assert!((k.values[1] - 1.6).abs() < 1e-14);
    }

    #[test]
    fn canonical_vectors_are_deterministic() {
        let (_, a) = hexagon(1.0);
        let (_, b) = hexagon(1.0);
        assert_eq!(a.vectors, b.vectors);
        // first significant component positive
        for v in &a.vectors {
            let first = v.iter().find(|x| x.abs() > 1e-8).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]);
        assert!(matches!(KSpectrum::solve(&m), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn rayleigh_identity_and_gradient() {
        let g = SectorGraph::build(4, ComponentSpec::distinguishable(4)).unwrap();
        let w = [0.9f64, 1.7, 0.9];
        let l = laplacian(&g, &w).unwrap();
        let k = KSpectrum::solve(l.full().unwrap()).unwrap();
        for (val, v) in k.values.iter().zip(&k.vectors) {
            let r = rayleigh_quotient(&g, &w, v);
            assert!((r - val).abs() <= 1e-10 * val.max(1.0f64));
            let grad = rayleigh_gradient(&g, &w, v);
            assert!(norm(&grad) < 1e-8);
        }
    }

    #[test]
    fn two_plus_one_projection() {
        let gamma = 0.7;
        let g = SectorGraph::build(3, ComponentSpec::new(vec![2, 1]).unwrap()).unwrap();
        let l = laplacian(&g, &[gamma, gamma]).unwrap();
        let sol = solve_sectors(&g, &l).unwrap();
        let p: Vec<f64> = sol.projected.values.iter().map(|k| k / gamma).collect();
        assert!((p[0]).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12 && (p[2] - 3.0).abs() < 1e-12);
        assert_eq!(sol.projected.groups[0].class, Some(SymmetryClass::Fermi));
        let full = sol.full.unwrap();
        let inside: Vec<usize> = full.groups.iter().map(|g| g.component_states.unwrap()).collect();
        assert_eq!(inside, vec![1, 1, 1, 0]);
    }

    #[test]
    fn expansion_limits() {
        let src: Arc<dyn OrbitalSource<f64>> = Arc::new(HarmonicOscillator::unit());
        let state = SlaterState::make_level(src, 0, 3).unwrap();
        let (_, k) = hexagon(1.2);
        let e = expansion(&state, &k);
        assert_eq!(e[0].energy(3.0), 4.5);
        assert!(e[5].energy(100.0) < 4.5);
        assert!((e[5].energy(1e12) - 4.5).abs() < 1e-10);
    }

    #[test]
    fn uniform_amplitudes_reproduce_slater() {
        let src: Arc<dyn OrbitalSource<f64>> = Arc::new(HarmonicOscillator::unit());
        let state = SlaterState::make_level(src, 0, 3).unwrap();
        let g = SectorGraph::build(3, ComponentSpec::distinguishable(3)).unwrap();
        let ones = SectorWavefunction::new(&state, &g, vec![1.0; 6]).unwrap();
        let signs: Vec<f64> = (0..6).map(|s| g.sign(s) as f64).collect();
        let mapped = SectorWavefunction::new(&state, &g, signs).unwrap();
        for x in [[0.3, -1.1, 0.8], [1.5, 0.2, -0.4], [-0.1, 0.0, 0.9]] {
            let f = state.eval(&x);
            assert_eq!(ones.eval(&x), f);
            assert!((mapped.eval(&x) - f.abs()).abs() < 1e-14 || (mapped.eval(&x) + f.abs()).abs() < 1e-14);
        }
        assert_eq!(ones.eval(&[0.5, 0.5, 1.0]), 0.0);
        assert!(SectorWavefunction::new(&state, &g, vec![1.0; 5]).is_err());
    }
}
