//! Free-fermion reference state: a normalized Slater determinant.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{determinant, SquareMatrix};
use crate::num::{factorial, Real};
use crate::trap::OrbitalSource;

/// Energies closer than this (relative to max(1, E)) count as one level.
pub const LEVEL_TOLERANCE: f64 = 1e-9;

/// `Ψ_F(x) = det[φ_{n_j}(x_i)] / sqrt(N!)` over strictly increasing orbital indices.
///
/// With orthonormal orbitals this is normalized on all of Rᴺ, so the norm on
/// one ordering sector `x_1 < ... < x_N` is exactly `1/N!`.
#[derive(Debug, Clone)]
pub struct SlaterState<T: Real> {
    occupation: Vec<usize>,
    orbital_energies: Vec<T>,
    energy: T,
    prefactor: T,
    source: Arc<dyn OrbitalSource<T>>,
}

impl<T: Real> SlaterState<T> {
    pub fn new(source: Arc<dyn OrbitalSource<T>>, occupation: Vec<usize>) -> Result<Self> {
        if occupation.is_empty() {
            return Err(Error::InvalidOccupation("no occupied orbitals".into()));
        }
        if occupation.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidOccupation(format!(
                "indices must be strictly increasing, got {occupation:?}"
            )));
        }
        let top = *occupation.last().unwrap();
        if top >= source.available() {
            return Err(Error::OrbitalIndexTooLarge {
                index: top,
                cap: source.available().saturating_sub(1),
            });
        }
        let orbital_energies: Vec<T> = occupation.iter().map(|&n| source.energy(n)).collect();
        let energy = orbital_energies.iter().copied().sum();
        let prefactor = T::one() / factorial::<T>(occupation.len()).sqrt();
        Ok(Self {
            occupation,
            orbital_energies,
            energy,
            prefactor,
            source,
        })
    }

    /// The `level`-th lowest distinct free-fermion energy for `n` particles.
    ///
    /// Fails when that energy is shared by more than one occupation.
    pub fn make_level(source: Arc<dyn OrbitalSource<T>>, level: usize, n: usize) -> Result<Self> {
        let groups = lowest_levels(source.as_ref(), n, level + 1)?;
        let (energy, occs) = &groups[level];
        if occs.len() > 1 {
            return Err(Error::DegenerateLevel {
                level,
                energy: *energy,
                multiplicity: occs.len(),
            });
        }
        Self::new(source, occs[0].clone())
    }

    pub fn particles(&self) -> usize {
        self.occupation.len()
    }

    pub fn occupation(&self) -> &[usize] {
        &self.occupation
    }

    pub fn orbital_energies(&self) -> &[T] {
        &self.orbital_energies
    }

    /// `E_F`, the sum of occupied orbital energies.
    pub fn energy(&self) -> T {
        self.energy
    }

    pub fn source(&self) -> &Arc<dyn OrbitalSource<T>> {
        &self.source
    }

    /// Norm of Ψ_F restricted to a single ordering sector.
    pub fn sector_norm(&self) -> T {
        T::one() / factorial::<T>(self.particles())
    }

    fn matrices(&self, x: &[T]) -> (SquareMatrix<T>, SquareMatrix<T>) {
        let n = self.particles();
        assert_eq!(x.len(), n, "point dimension must equal particle number");
        let mut vals = SquareMatrix::zeros(n);
        let mut ders = SquareMatrix::zeros(n);
        let mut v = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        for (i, &xi) in x.iter().enumerate() {
            self.source.eval_set(&self.occupation, xi, &mut v, &mut d);
            for j in 0..n {
                vals[(i, j)] = v[j];
                ders[(i, j)] = d[j];
            }
        }
        (vals, ders)
    }

    fn replaced_det(vals: &SquareMatrix<T>, ders: &SquareMatrix<T>, row: usize) -> T {
        let mut m = vals.clone();
        for j in 0..m.dim() {
            m[(row, j)] = ders[(row, j)];
        }
        determinant(m)
    }

    pub fn eval(&self, x: &[T]) -> T {
        let (vals, _) = self.matrices(x);
        self.prefactor * determinant(vals)
    }

    /// Exact gradient: component `i` is the determinant with row `i`
    /// replaced by orbital derivatives.
    pub fn grad(&self, x: &[T]) -> Vec<T> {
        let (vals, ders) = self.matrices(x);
        (0..x.len())
            .map(|i| self.prefactor * Self::replaced_det(&vals, &ders, i))
            .collect()
    }

    pub fn eval_with_grad(&self, x: &[T]) -> (T, Vec<T>) {
        let (vals, ders) = self.matrices(x);
        let g = (0..x.len())
            .map(|i| self.prefactor * Self::replaced_det(&vals, &ders, i))
            .collect();
        (self.prefactor * determinant(vals), g)
    }

    /// `∂Ψ_F/∂x_i` alone.
    pub fn partial(&self, x: &[T], i: usize) -> T {
        let (vals, ders) = self.matrices(x);
        self.prefactor * Self::replaced_det(&vals, &ders, i)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    energy: f64,
    occupation: Vec<usize>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on energy, ties broken by occupation for determinism
        other
            .energy
            .total_cmp(&self.energy)
            .then_with(|| other.occupation.cmp(&self.occupation))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The lowest `count` distinct free-fermion energies for `n` particles, each
/// with all occupations realising it.
pub fn lowest_levels<T: Real>(
    source: &dyn OrbitalSource<T>,
    n: usize,
    count: usize,
) -> Result<Vec<(f64, Vec<Vec<usize>>)>> {
    if n == 0 {
        return Err(Error::ParticleCount(0));
    }
    let available = source.available();
    if n > available {
        return Err(Error::InvalidOccupation(format!(
            "{n} particles need {n} orbitals, source has {available}"
        )));
    }
    let energy_of = |occ: &[usize]| occ.iter().map(|&k| source.energy(k).to_f64_lossy()).sum::<f64>();
    let start: Vec<usize> = (0..n).collect();
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    heap.push(Candidate {
        energy: energy_of(&start),
        occupation: start.clone(),
    });
    seen.insert(start);

    let mut groups: Vec<(f64, Vec<Vec<usize>>)> = Vec::new();
    while let Some(Candidate { energy, occupation }) = heap.pop() {
        let same = groups
            .last()
            .is_some_and(|(e, _)| (energy - e).abs() <= LEVEL_TOLERANCE * e.abs().max(1.0));
        if same {
            groups.last_mut().unwrap().1.push(occupation.clone());
        } else {
            if groups.len() == count {
                return Ok(groups);
            }
            groups.push((energy, vec![occupation.clone()]));
        }
        for i in 0..n {
            let next = occupation[i] + 1;
            let free = if i + 1 < n { next < occupation[i + 1] } else { next < available };
            if free {
                let mut occ = occupation.clone();
                occ[i] = next;
                if seen.insert(occ.clone()) {
                    heap.push(Candidate {
                        energy: energy_of(&occ),
                        occupation: occ,
                    });
                }
            }
        }
    }
    if groups.len() == count {
        // Exhausted the source; the last group may be incomplete only if the
        // source is tiny, which the caller cannot distinguish, so accept it.
        return Ok(groups);
    }
    Err(Error::InvalidOccupation(format!(
        "source has too few orbitals to reach level {}",
        count - 1
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap::HarmonicOscillator;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ho() -> Arc<dyn OrbitalSource<f64>> {
        Arc::new(HarmonicOscillator::unit())
    }

    #[test]
    fn ground_levels() {
        let s = SlaterState::make_level(ho(), 0, 3).unwrap();
        assert_eq!(s.occupation(), &[0, 1, 2]);
        assert_eq!(s.energy(), 4.5);
        let s = SlaterState::make_level(ho(), 0, 2).unwrap();
        assert_eq!(s.occupation(), &[0, 1]);
        assert_eq!(s.energy(), 2.0);
    }

    #[test]
    fn excited_and_degenerate_levels() {
        let s = SlaterState::make_level(ho(), 1, 3).unwrap();
        assert_eq!(s.occupation(), &[0, 1, 3]);
        assert_eq!(s.energy(), 5.5);
        match SlaterState::make_level(ho(), 2, 3) {
            Err(Error::DegenerateLevel { level: 2, energy, multiplicity: 2 }) => {
                assert_eq!(energy, 6.5)
            }
            other => panic!("expected degeneracy error, got {other:?}"),
        }
        let levels = lowest_levels(ho().as_ref(), 3, 3).unwrap();
        assert_eq!(levels[2].1, vec![vec![0, 1, 4], vec![0, 2, 3]]);
    }

    #[test]
    fn rejects_bad_occupations() {
        assert!(SlaterState::new(ho(), vec![1, 1]).is_err());
        assert!(SlaterState::new(ho(), vec![2, 0]).is_err());
        assert!(SlaterState::new(ho(), vec![0, 500]).is_err());
    }

    #[test]
    fn two_particle_closed_form() {
        let s = SlaterState::make_level(ho(), 0, 2).unwrap();
        // π^{-1/2} (x2 - x1) exp(-(x1² + x2²)/2)
        let v = s.eval(&[0.0, 1.0]);
        assert_relative_eq!(v, PI.powf(-0.5) * (-0.5f64).exp(), epsilon = 1e-14);
        for x in [-1.3, 0.0, 0.4, 2.2] {
            let g = s.grad(&[x, x]);
            assert_relative_eq!(g[0], -PI.powf(-0.5) * (-x * x).exp(), epsilon = 1e-14);
            assert_relative_eq!(g[1], -g[0], epsilon = 1e-14);
        }
    }

    #[test]
    fn coincidence_is_a_node() {
        let s = SlaterState::make_level(ho(), 0, 3).unwrap();
        let v = s.eval(&[0.37, 0.37, -1.2]);
        assert!(v.abs() <= 1e-12);
        let v = s.eval(&[0.1, -0.6, -0.6]);
        assert!(v.abs() <= 1e-12);
    }

    #[test]
    fn sector_norm_is_inverse_factorial() {
        let s = SlaterState::make_level(ho(), 0, 4).unwrap();
        assert_relative_eq!(s.sector_norm(), 1.0 / 24.0);
    }

    #[test]
    fn generic_over_f32() {
        let src: Arc<dyn OrbitalSource<f32>> = Arc::new(HarmonicOscillator::<f32>::unit());
        let s = SlaterState::make_level(src, 0, 2).unwrap();
        let v = s.eval(&[0.0f32, 1.0]);
        assert!((v as f64 - PI.powf(-0.5) * (-0.5f64).exp()).abs() < 1e-6);
    }
}
