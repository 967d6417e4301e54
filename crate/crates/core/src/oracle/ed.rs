use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::delta::{DeltaTensor, MAX_ORBITALS};
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, SquareMatrix};
use crate::mc::shard_rng;
use crate::sectors::ComponentSpec;

pub const DENSE_ED_LIMIT: usize = 5000;
pub const MAX_ED_DIMENSION: usize = 200_000;
const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdSolver {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdConfig {
    pub particles: usize,
    /// Orbitals `0..n_max` per particle.
    pub n_max: usize,
    pub couplings: Vec<f64>,
    pub components: ComponentSpec,
    /// Number of states tracked across the couplings.
    pub states: usize,
    #[serde(default)]
    pub solver: EdSolver,
}

impl EdConfig {
    pub fn new(particles: usize, n_max: usize, couplings: Vec<f64>) -> Self {
        Self {
            particles,
            n_max,
            couplings,
            components: ComponentSpec::distinguishable(particles),
            states: 1,
            solver: EdSolver::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.particles) {
            return Err(Error::InvalidConfig(format!(
                "exact diagonalization supports 2 or 3 particles, got {}",
                self.particles
            )));
        }
        self.components.check(self.particles)?;
        if self.n_max < self.particles + 2 || self.n_max > MAX_ORBITALS {
            return Err(Error::InvalidConfig(format!(
                "n_max must lie in {}..={MAX_ORBITALS}, got {}",
                self.particles + 2,
                self.n_max
            )));
        }
        let dim = self.n_max.pow(self.particles as u32);
        if dim > MAX_ED_DIMENSION {
            return Err(Error::InvalidConfig(format!(
                "product basis dimension {dim} exceeds {MAX_ED_DIMENSION}"
            )));
        }
        if self.couplings.is_empty() || self.couplings.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidConfig("couplings must be finite and non-negative".into()));
        }
        if self.couplings.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("couplings must be strictly increasing".into()));
        }
        if self.states == 0 {
            return Err(Error::InvalidConfig("at least one state must be tracked".into()));
        }
        Ok(())
    }
}

/// Energy and contact density `⟨Σ_{i<j} δ(x_i − x_j)⟩ = dE/dg` of one tracked state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub energy: f64,
    pub contact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdResult {
    pub particles: usize,
    pub n_max: usize,
    pub dimension: usize,
    pub couplings: Vec<f64>,
    /// Lowest eigenvalues at each coupling, ascending.
    pub levels: Vec<Vec<f64>>,
    /// `tracked[t][j]`: state `j`, followed by overlap from the first coupling.
    pub tracked: Vec<Vec<TrackedPoint>>,
}

impl EdResult {
    pub fn energies(&self, state: usize) -> Vec<f64> {
        self.tracked.iter().map(|row| row[state].energy).collect()
    }

    pub fn contacts(&self, state: usize) -> Vec<f64> {
        self.tracked.iter().map(|row| row[state].contact).collect()
    }
}

/// Oscillator product basis, optionally antisymmetrized inside components.
///
/// Particle 0 is the most significant digit of a product index.
#[derive(Debug, Clone)]
pub struct ProductBasis {
    n: usize,
    particles: usize,
    product_dim: usize,
    /// Per basis state: product indices with coefficients.
    states: Vec<Vec<(u32, f64)>>,
    energies: Vec<f64>,
}

fn increasing_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// All permutations of `0..k` with their signs.
fn signed_permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    if k == 0 {
        return vec![(vec![], 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in signed_permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            // inserting at pos moves the new element past k-1-pos others
            let sign = if (k - 1 - pos).is_multiple_of(2) { s } else { -s };
            out.push((q, sign));
        }
    }
    out
}

impl ProductBasis {
    pub fn new(n: usize, spec: &ComponentSpec) -> Self {
        let particles = spec.total();
        let product_dim = n.pow(particles as u32);
        let per_component: Vec<Vec<Vec<usize>>> =
            spec.sizes().iter().map(|&s| increasing_tuples(n, s)).collect();
        let perms: Vec<Vec<(Vec<usize>, f64)>> =
            spec.sizes().iter().map(|&s| signed_permutations(s)).collect();
        let norm = 1.0 / (spec.group_order() as f64).sqrt();

        // Cartesian product over components.
        let mut choices: Vec<Vec<usize>> = vec![vec![]];
        for tuples in &per_component {
            let mut next = Vec::with_capacity(choices.len() * tuples.len());
            for c in &choices {
                for t in 0..tuples.len() {
                    let mut c2 = c.clone();
                    c2.push(t);
                    next.push(c2);
                }
            }
            choices = next;
        }

        let mut states = Vec::with_capacity(choices.len());
        let mut energies = Vec::with_capacity(choices.len());
        for choice in choices {
            let mut terms: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
            for (c, &t) in choice.iter().enumerate() {
                let tuple = &per_component[c][t];
                let mut next = Vec::new();
                for (prefix, s) in &terms {
                    for (perm, sp) in &perms[c] {
                        let mut digits = prefix.clone();
                        digits.extend(perm.iter().map(|&i| tuple[i]));
                        next.push((digits, s * sp));
                    }
                }
                terms = next;
            }
            let energy: f64 = terms[0].0.iter().map(|&d| d as f64 + 0.5).sum();
            let state = terms
                .into_iter()
                .map(|(digits, s)| {
                    let idx = digits.iter().fold(0usize, |acc, &d| acc * n + d);
                    (idx as u32, s * norm)
                })
                .collect();
            states.push(state);
            energies.push(energy);
        }
        Self {
            n,
            particles,
            product_dim,
            states,
            energies,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    fn digits(&self, mut p: usize, out: &mut [usize; 3]) {
        for i in (0..self.particles).rev() {
            out[i] = p % self.n;
            p /= self.n;
        }
    }

    /// `⟨p| Σ_{i<j} δ(x_i − x_j) |q⟩` between product states.
    fn contact_element(&self, t: &DeltaTensor, dp: &[usize; 3], dq: &[usize; 3]) -> f64 {
        let np = self.particles;
        let mut v = 0.0;
        for i in 0..np {
            for j in i + 1..np {
                if (0..np).all(|k| k == i || k == j || dp[k] == dq[k]) {
                    v += t.get(dp[i], dp[j], dq[i], dq[j]);
                }
            }
        }
        v
    }

    fn lift(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (state, &c) in self.states.iter().zip(x) {
            for &(p, b) in state {
                out[p as usize] += b * c;
            }
        }
    }

    fn restrict(&self, y: &[f64]) -> Vec<f64> {
        self.states
            .iter()
            .map(|state| state.iter().map(|&(p, b)| b * y[p as usize]).sum())
            .collect()
    }

    /// Contact operator applied in the product space.
    fn apply_contact_product(&self, t: &DeltaTensor, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let np = self.particles;
        let stride: Vec<usize> = (0..np).map(|i| n.pow((np - 1 - i) as u32)).collect();
        y.par_iter_mut().enumerate().for_each(|(p, yp)| {
            let mut d = [0usize; 3];
            self.digits(p, &mut d);
            let mut acc = 0.0;
            for i in 0..np {
                for j in i + 1..np {
                    let (a, b) = (d[i], d[j]);
                    let base = p - a * stride[i] - b * stride[j];
                    for a2 in 0..n {
                        let start = (a + b + a2) % 2;
                        for b2 in (start..n).step_by(2) {
                            acc += t.get(a, b, a2, b2) * x[base + a2 * stride[i] + b2 * stride[j]];
                        }
                    }
                }
            }
            *yp = acc;
        });
    }

    pub fn apply_contact(&self, t: &DeltaTensor, x: &[f64]) -> Vec<f64> {
        let mut lifted = vec![0.0; self.product_dim];
        self.lift(x, &mut lifted);
        let mut out = vec![0.0; self.product_dim];
        self.apply_contact_product(t, &lifted, &mut out);
        self.restrict(&out)
    }

    /// Dense contact matrix in this basis.
    pub fn contact_matrix(&self, t: &DeltaTensor) -> Vec<f64> {
        let dim = self.dim();
        let digits: Vec<Vec<([usize; 3], f64)>> = self
            .states
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&(p, c)| {
                        let mut d = [0usize; 3];
                        self.digits(p as usize, &mut d);
                        (d, c)
                    })
                    .collect()
            })
            .collect();
        let mut m = vec![0.0; dim * dim];
        m.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            for j in 0..=i {
                let mut v = 0.0;
                for (dp, cp) in &digits[i] {
                    for (dq, cq) in &digits[j] {
                        v += cp * cq * self.contact_element(t, dp, dq);
                    }
                }
                row[j] = v;
            }
        });
        for i in 0..dim {
            for j in 0..i {
                m[j * dim + i] = m[i * dim + j];
            }
        }
        m
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
}

struct Eigenpairs {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn dense_lowest(diag: &[f64], contact: &[f64], g: f64, count: usize) -> Result<Eigenpairs> {
    let dim = diag.len();
    let h = faer::Mat::<f64>::from_fn(dim, dim, |i, j| {
        let d = if i == j { diag[i] } else { 0.0 };
        d + g * contact[i * dim + j]
    });
    let eig = h
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::EigenNotConverged { residual: f64::NAN })?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let count = count.min(dim);
    Ok(Eigenpairs {
        values: (0..count).map(|k| s[k]).collect(),
        vectors: (0..count)
            .map(|k| (0..dim).map(|i| u[(i, k)]).collect())
            .collect(),
    })
}

fn orthonormalize_against(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
    }
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// Lowest `want` eigenpairs by restarted block Lanczos with full
/// reorthogonalization. Restarts keep the lowest `block` Ritz vectors.
pub fn block_lanczos(
    dim: usize,
    apply: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    want: usize,
    tol: f64,
    max_restarts: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let want = want.min(dim);
    let block = (want + 2).min(dim);
    let memory_cap = (400_000_000 / (16 * dim.max(1))).max(3 * block);
    let max_basis = memory_cap.min(240).min(dim);
    let mut rng = shard_rng(0x1A2C, 0, 0);
    let mut random_vector = |basis: &[Vec<f64>]| -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
            if orthonormalize_against(&mut v, basis) > 1e-8 {
                return v;
            }
        }
    };

    let mut x: Vec<Vec<f64>> = Vec::with_capacity(block);
    for _ in 0..block {
        let v = random_vector(&x);
        x.push(v);
    }
    let mut worst = f64::INFINITY;
    for _ in 0..max_restarts.max(1) {
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
        let mut w: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
        for v in x.drain(..) {
            let mut v = v;
            if orthonormalize_against(&mut v, &q) < 1e-8 {
                v = random_vector(&q);
            }
            w.push(apply(&v));
            q.push(v);
        }
        let mut last = 0..q.len();
        while q.len() + block <= max_basis {
            let start = q.len();
            for idx in last.clone() {
                let mut v = w[idx].clone();
                if orthonormalize_against(&mut v, &q) < 1e-10 {
                    v = random_vector(&q);
                }
                w.push(apply(&v));
                q.push(v);
            }
            last = start..q.len();
        }
        let m = q.len();
        let t = SquareMatrix::from_fn(m, |i, j| 0.5 * (dot(&q[i], &w[j]) + dot(&q[j], &w[i])));
        let eig = symmetric_eigen(&t)?;
        let mut residuals = Vec::with_capacity(block);
        let mut ritz = Vec::with_capacity(block);
        for k in 0..block.min(m) {
            let s = &eig.vectors[k];
            let mut y = vec![0.0; dim];
            let mut hy = vec![0.0; dim];
            for (i, &si) in s.iter().enumerate() {
                for (yj, &qj) in y.iter_mut().zip(&q[i]) {
                    *yj += si * qj;
                }
                for (hj, &wj) in hy.iter_mut().zip(&w[i]) {
                    *hj += si * wj;
                }
            }
            let theta = eig.values[k];
            let r: f64 = hy
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt();
            residuals.push(r / theta.abs().max(1.0));
            ritz.push(y);
        }
        worst = residuals[..want].iter().copied().fold(0.0, f64::max);
        if worst <= tol {
            ritz.truncate(want);
            return Ok((eig.values[..want].to_vec(), ritz));
        }
        x = ritz;
    }
    Err(Error::EigenNotConverged { residual: worst })
}

fn group_of(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(values.len());
    let mut g = 0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 && (v - values[i - 1]).abs() > 1e-8 * v.abs().max(1.0) {
            g += 1;
        }
        out.push(g);
    }
    out
}

/// Assigns each tracked vector to the eigenspace it overlaps most, then
/// replaces it by its normalized projection onto that eigenspace.
fn continue_states(prev: &[Vec<f64>], pairs: &Eigenpairs) -> Vec<(f64, Vec<f64>)> {
    let groups = group_of(&pairs.values);
    let ngroups = groups.last().map_or(0, |g| g + 1);
    let mut capacity = vec![0usize; ngroups];
    groups.iter().for_each(|&g| capacity[g] += 1);
    let overlap: Vec<Vec<f64>> = prev
        .iter()
        .map(|u| {
            let mut o = vec![0.0; ngroups];
            for (l, w) in pairs.vectors.iter().enumerate() {
                o[groups[l]] += dot(u, w).powi(2);
            }
            o
        })
        .collect();
    let mut candidates: Vec<(f64, usize, usize)> = overlap
        .iter()
        .enumerate()
        .flat_map(|(j, o)| o.iter().enumerate().map(move |(g, &v)| (v, j, g)))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned: Vec<Option<usize>> = vec![None; prev.len()];
    for (_, j, g) in candidates {
        if assigned[j].is_none() && capacity[g] > 0 {
            assigned[j] = Some(g);
            capacity[g] -= 1;
        }
    }
    let mut per_group: Vec<Vec<Vec<f64>>> = vec![Vec::new(); ngroups];
    prev.iter()
        .zip(&assigned)
        .map(|(u, g)| {
            let g = g.expect("enough eigenpairs for every tracked state");
            let members: Vec<usize> = (0..groups.len()).filter(|&l| groups[l] == g).collect();
            let mut v = vec![0.0; u.len()];
            for &l in &members {
                let c = dot(u, &pairs.vectors[l]);
                for (vi, &wi) in v.iter_mut().zip(&pairs.vectors[l]) {
                    *vi += c * wi;
                }
            }
            let done = &mut per_group[g];
            if orthonormalize_against(&mut v, done) < 1e-6 {
                // projection collapsed; take the first member not yet used
                v = members
                    .iter()
                    .map(|&l| {
                        let mut w = pairs.vectors[l].clone();
                        let r = orthonormalize_against(&mut w, done);
                        (r, w)
                    })
                    .max_by(|a, b| a.0.total_cmp(&b.0))
                    .unwrap()
                    .1;
            }
            done.push(v.clone());
            let energy = members.iter().map(|&l| pairs.values[l]).sum::<f64>() / members.len() as f64;
            (energy, v)
        })
        .collect()
}

/// Exact diagonalization of `Σ_i (−½∂² + ½x²) + g Σ_{i<j} δ(x_i − x_j)` in a
/// truncated oscillator basis, for every coupling in `cfg`.
pub fn diagonalize(cfg: &EdConfig) -> Result<EdResult> {
    cfg.validate()?;
    let tensor = DeltaTensor::new(cfg.n_max)?;
    let basis = ProductBasis::new(cfg.n_max, &cfg.components);
    let dim = basis.dim();
    if cfg.states > dim {
        return Err(Error::InvalidConfig(format!(
            "{} states requested from a basis of dimension {dim}",
            cfg.states
        )));
    }
    let count = (cfg.states + 2).min(dim);
    let dense = match cfg.solver {
        EdSolver::Auto => dim <= DENSE_ED_LIMIT,
        EdSolver::Dense => {
            if dim > DENSE_ED_LIMIT {
                return Err(Error::TooLarge {
                    dim,
                    limit: DENSE_ED_LIMIT,
                });
            }
            true
        }
        EdSolver::Lanczos => false,
    };
    let contact = if dense { Some(basis.contact_matrix(&tensor)) } else { None };
    let diag = basis.energies().to_vec();

    let solved: Vec<Eigenpairs> = cfg
        .couplings
        .par_iter()
        .map(|&g| match &contact {
            Some(c) => dense_lowest(&diag, c, g, count),
            None => {
                let apply = |x: &[f64]| -> Vec<f64> {
                    let v = basis.apply_contact(&tensor, x);
                    x.iter()
                        .zip(&diag)
                        .zip(v)
                        .map(|((xi, di), vi)| di * xi + g * vi)
                        .collect()
                };
                block_lanczos(dim, &apply, count, RESIDUAL_TOLERANCE, 60)
                    .map(|(values, vectors)| Eigenpairs { values, vectors })
            }
        })
        .collect::<Result<_>>()?;

    let contact_of = |v: &[f64]| -> f64 {
        match &contact {
            Some(c) => (0..dim)
                .map(|i| v[i] * dot(&c[i * dim..(i + 1) * dim], v))
                .sum(),
            None => dot(v, &basis.apply_contact(&tensor, v)),
        }
    };

    let mut tracked = Vec::with_capacity(solved.len());
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (t, pairs) in solved.iter().enumerate() {
        let next: Vec<(f64, Vec<f64>)> = if t == 0 {
            (0..cfg.states)
                .map(|j| (pairs.values[j], pairs.vectors[j].clone()))
                .collect()
        } else {
            continue_states(&current, pairs)
        };
        tracked.push(
            next.iter()
                .map(|(e, v)| TrackedPoint {
                    energy: *e,
                    contact: contact_of(v),
                })
                .collect(),
        );
        current = next.into_iter().map(|(_, v)| v).collect();
    }

    Ok(EdResult {
        particles: cfg.particles,
        n_max: cfg.n_max,
        dimension: dim,
        couplings: cfg.couplings.clone(),
        levels: solved
            .iter()
            .map(|p| p.values[..cfg.states].to_vec())
            .collect(),
        tracked,
    })
}
