//! Ordering sectors, their adjacency, and the weighted sector Laplacian.
//!
//! A sector is a permutation `σ` listing which particle sits in each ordered
//! slot (slot 0 leftmost). Neighbouring sectors differ by swapping the
//! particles in slots `k-1, k`; that edge carries boundary weight `γ_k`.
//!
//! With Ψ = a_σ Ψ_F in each sector and Ψ_F already antisymmetric, exchanging
//! two identical fermions leaves the amplitude unchanged: `a_{π·σ} = a_σ`
//! for every relabelling `π` inside one component. The component subspace is
//! spanned by uniform sums over such orbits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::num::Real;

pub const MAX_PARTICLES: usize = 8;

/// Largest matrix the dense sector solvers will build.
pub const DENSE_LIMIT: usize = 5040;

/// Sizes of the classes of identical fermions. Particles are numbered in
/// component order: the first `sizes[0]` particles form component 0, and so on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentSpec {
    sizes: Vec<usize>,
}

impl ComponentSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidComponents(format!(
                "component sizes must be positive, got {sizes:?}"
            )));
        }
        Ok(Self { sizes })
    }

    pub fn distinguishable(n: usize) -> Self {
        Self { sizes: vec![1; n] }
    }

    /// Parses `"2,1"`.
    pub fn parse(text: &str) -> Result<Self> {
        let sizes = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidComponents(format!("{text:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.total() != n {
            return Err(Error::InvalidComponents(format!(
                "sizes {:?} sum to {}, not {n}",
                self.sizes,
                self.total()
            )));
        }
        Ok(())
    }

    /// Component of particle `p` (0-based).
    pub fn component_of(&self, p: usize) -> usize {
        let mut acc = 0;
        for (c, &s) in self.sizes.iter().enumerate() {
            acc += s;
            if p < acc {
                return c;
            }
        }
        panic!("particle {p} outside component spec {:?}", self.sizes)
    }

    /// Order of the relabelling group, `Π N_c!`.
    pub fn group_order(&self) -> usize {
        self.sizes.iter().map(|&s| (1..=s).product::<usize>()).product()
    }

    pub fn is_distinguishable(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }
}

impl std::fmt::Display for ComponentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// 1-based boundary index.
    pub k: usize,
}

/// All `N!` ordering sectors in lexicographic order.
#[derive(Debug, Clone)]
pub struct SectorGraph {
    n: usize,
    spec: ComponentSpec,
    perms: Vec<u8>,
    edges: Vec<Edge>,
    /// Orthonormal spanning set of the component subspace, as sparse columns.
    basis: Vec<Vec<(usize, f64)>>,
}

fn lehmer_rank(perm: &[u8]) -> usize {
    let n = perm.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&p| p < perm[i]).count();
        rank = rank * (n - i) + smaller;
    }
    rank
}

fn permutation_sign(perm: &[u8]) -> i8 {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn next_permutation(p: &mut [u8]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

impl SectorGraph {
    pub fn build(n: usize, spec: ComponentSpec) -> Result<Self> {
        if !(2..=MAX_PARTICLES).contains(&n) {
            return Err(Error::ParticleCount(n));
        }
        spec.check(n)?;
        let mut perms = Vec::new();
        let mut p: Vec<u8> = (0..n as u8).collect();
        loop {
            perms.extend_from_slice(&p);
            if !next_permutation(&mut p) {
                break;
            }
        }
        let count = perms.len() / n;
        let mut edges = Vec::with_capacity(count * (n - 1) / 2);
        let mut swapped = vec![0u8; n];
        for a in 0..count {
            let sigma = &perms[a * n..(a + 1) * n];
            for k in 1..n {
                swapped.copy_from_slice(sigma);
                swapped.swap(k - 1, k);
                let b = lehmer_rank(&swapped);
                if a < b {
                    edges.push(Edge { a, b, k });
                }
            }
        }

        // Orbits under relabelling within components = sectors sharing the
        // slot -> component pattern.
        let mut orbit_of: std::collections::HashMap<Vec<usize>, usize> = Default::default();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for s in 0..count {
            let pattern: Vec<usize> = perms[s * n..(s + 1) * n]
                .iter()
                .map(|&q| spec.component_of(q as usize))
                .collect();
            let next = members.len();
            let id = *orbit_of.entry(pattern).or_insert(next);
            if id == next {
                members.push(Vec::new());
            }
            members[id].push(s);
        }
        let basis = members
            .into_iter()
            .map(|m| {
                let c = 1.0 / (m.len() as f64).sqrt();
                m.into_iter().map(|s| (s, c)).collect()
            })
            .collect();

        Ok(Self {
            n,
            spec,
            perms,
            edges,
            basis,
        })
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &ComponentSpec {
        &self.spec
    }

    /// Number of sectors, `N!`.
    pub fn len(&self) -> usize {
        self.perms.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    /// Particle (0-based) in each slot of sector `s`.
    pub fn sector(&self, s: usize) -> &[u8] {
        &self.perms[s * self.n..(s + 1) * self.n]
    }

    /// Index of a sector given its slot -> particle list.
    pub fn index_of(&self, perm: &[u8]) -> usize {
        lehmer_rank(perm)
    }

    /// Sector reached by swapping slots `k-1` and `k`.
    pub fn neighbor(&self, s: usize, k: usize) -> usize {
        let mut p = self.sector(s).to_vec();
        p.swap(k - 1, k);
        lehmer_rank(&p)
    }

    pub fn sign(&self, s: usize) -> i8 {
        permutation_sign(self.sector(s))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, s: usize) -> usize {
        self.edges.iter().filter(|e| e.a == s || e.b == s).count()
    }

    /// Sparse orthonormal basis of the component subspace.
    pub fn projection_basis(&self) -> &[Vec<(usize, f64)>] {
        &self.basis
    }

    pub fn projection_dim(&self) -> usize {
        self.basis.len()
    }

    /// Projection basis as dense columns over sectors.
    pub fn projection_columns<T: Real>(&self) -> Vec<Vec<T>> {
        self.basis
            .iter()
            .map(|col| {
                let mut v = vec![T::zero(); self.len()];
                for &(s, c) in col {
                    v[s] = T::lit(c);
                }
                v
            })
            .collect()
    }

    /// Maps projected coordinates back to sector amplitudes.
    pub fn lift<T: Real>(&self, coords: &[T]) -> Vec<T> {
        let mut v = vec![T::zero(); self.len()];
        for (col, &c) in self.basis.iter().zip(coords) {
            for &(s, b) in col {
                v[s] = v[s] + T::lit(b) * c;
            }
        }
        v
    }

    /// Sector label as 1-based particle numbers, e.g. `"213"` or `"2-1-3"` for N ≥ 10.
    pub fn label(&self, s: usize) -> String {
        let parts: Vec<String> = self.sector(s).iter().map(|p| (p + 1).to_string()).collect();
        if self.n < 10 {
            parts.concat()
        } else {
            parts.join("-")
        }
    }

    /// For three particles, sector indices in the order of the hexagon tour
    /// `x2<x1<x3, x2<x3<x1, x3<x2<x1, x3<x1<x2, x1<x3<x2, x1<x2<x3`.
    pub fn hexagon_order(&self) -> Option<[usize; 6]> {
        if self.n != 3 {
            return None;
        }
        let tour: [[u8; 3]; 6] = [[1, 0, 2], [1, 2, 0], [2, 1, 0], [2, 0, 1], [0, 2, 1], [0, 1, 2]];
        Some(tour.map(|p| lehmer_rank(&p)))
    }

    /// Edge list as text lines `σ τ k γ_k`.
    pub fn dump_edges(&self, weights: &[f64]) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} {} {} {:.16e}",
                self.label(e.a),
                self.label(e.b),
                e.k,
                weights[e.k - 1]
            );
        }
        out
    }
}

/// The weighted sector Laplacian, full and projected onto the component subspace.
#[derive(Debug, Clone)]
pub struct SectorLaplacian<T: Real> {
    weights: Vec<T>,
    full: Option<SquareMatrix<T>>,
    projected: SquareMatrix<T>,
}

impl<T: Real> SectorLaplacian<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `None` when `N!` exceeds [`DENSE_LIMIT`].
    pub fn full(&self) -> Option<&SquareMatrix<T>> {
        self.full.as_ref()
    }

    pub fn projected(&self) -> &SquareMatrix<T> {
        &self.projected
    }
}

/// `(L a)_σ = Σ_k γ_k (a_σ − a_{σ∘τ_k})`, applied without forming `L`.
pub fn apply_laplacian<T: Real>(graph: &SectorGraph, weights: &[T], a: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); graph.len()];
    for e in graph.edges() {
        let w = weights[e.k - 1];
        let d = w * (a[e.a] - a[e.b]);
        out[e.a] = out[e.a] + d;
        out[e.b] = out[e.b] - d;
    }
    out
}

fn check_weights<T: Real>(graph: &SectorGraph, weights: &[T]) -> Result<()> {
    let expected = graph.particles() - 1;
    if weights.len() != expected {
        return Err(Error::WeightCount {
            expected,
            got: weights.len(),
        });
    }
    for (i, &w) in weights.iter().enumerate() {
        if !(w > T::zero()) {
            return Err(Error::NonPositiveWeight {
                k: i + 1,
                value: w.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Builds `L` with `L_σσ = Σ_k γ_k` and `L_{σ,σ∘τ_k} = −γ_k`, and `Pᵀ L P`.
pub fn laplacian<T: Real>(graph: &SectorGraph, weights: &[T]) -> Result<SectorLaplacian<T>> {
    check_weights(graph, weights)?;
    let n = graph.len();
    let full = if n <= DENSE_LIMIT {
        let total: T = weights.iter().copied().sum();
        let mut m = SquareMatrix::zeros(n);
        for s in 0..n {
            m[(s, s)] = total;
        }
        for e in graph.edges() {
            let w = weights[e.k - 1];
            m[(e.a, e.b)] = m[(e.a, e.b)] - w;
            m[(e.b, e.a)] = m[(e.b, e.a)] - w;
        }
        Some(m)
    } else {
        None
    };

    let d = graph.projection_dim();
    if d > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dim: d,
            limit: DENSE_LIMIT,
        });
    }
    let basis = graph.projection_basis();
    let images: Vec<Vec<T>> = basis
        .iter()
        .map(|col| {
            let mut v = vec![T::zero(); n];
            for &(s, c) in col {
                v[s] = T::lit(c);
            }
            apply_laplacian(graph, weights, &v)
        })
        .collect();
    let projected = SquareMatrix::from_fn(d, |i, j| {
        basis[i]
            .iter()
            .map(|&(s, c)| T::lit(c) * images[j][s])
            .sum()
    });

    Ok(SectorLaplacian {
        weights: weights.to_vec(),
        full,
        projected,
    })
}
