//! Boundary weights `γ_k`.
//!
//! `γ_k` is `N!` times the integral of `(∂Ψ_F/∂x)²` over the boundary where
//! the k-th and (k+1)-th ordered coordinates coincide:
//!
//! ```text
//! γ_k = N! ∫ (∂_z Ψ_F)²  over  y_1 < .. < y_{k-1} < z = z < y_{k+2} < .. < y_N
//! ```
//!
//! The `N!` is the inverse of the single-sector norm of Ψ_F. Up to `N = 3` the
//! (N-1)-dimensional integral is done with tensorised composite Gauss–Legendre
//! rules on a nested map of the ordered region onto the unit cube; beyond that
//! with stratified, seeded Monte Carlo.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::statistics::Distribution;

use crate::error::{Error, Result};
use crate::mc::{run_shards, Moments};
use crate::num::factorial;
use crate::quadrature::{gauss_legendre, Rule};
use crate::slater::SlaterState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Quadrature for `N <= 3`, Monte Carlo above.
    Auto,
    Quadrature,
    MonteCarlo,
}

/// Which function of Ψ_F is integrated over the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryIntegrand {
    /// `(∂Ψ_F/∂x_i)²` with `x_i` one of the two coincident coordinates.
    NormalDerivative,
    /// `(½ (∂_i − ∂_j) Ψ_F)²`, the half derivative jump across the plane.
    HalfJump,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub method: Method,
    /// Absolute error target for quadrature.
    pub quad_tolerance: f64,
    /// Points per panel of the composite Gauss–Legendre rule.
    pub gauss_order: usize,
    /// Panels per dimension are `2^depth`; refinement stops here.
    pub max_depth: u32,
    /// Absolute standard-error target for Monte Carlo.
    pub mc_tolerance: f64,
    pub samples: u64,
    pub seed: u64,
    pub shards: usize,
    /// Orbital magnitude defining the truncated domain.
    pub truncation: f64,
    /// Reuse γ_k for γ_{N-k} on reflection-symmetric traps.
    pub use_parity: bool,
    pub integrand: BoundaryIntegrand,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            quad_tolerance: 1e-10,
            gauss_order: 16,
            max_depth: 7,
            mc_tolerance: 1e-2,
            samples: 1_000_000,
            seed: 20140101,
            shards: 64,
            truncation: 1e-12,
            use_parity: true,
            integrand: BoundaryIntegrand::NormalDerivative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWeight {
    /// 1-based boundary index: ordered slots `k` and `k+1` coincide.
    pub k: usize,
    pub value: f64,
    pub error: f64,
    pub method: MethodTag,
}

/// The ordered-coordinate map from the unit cube onto one boundary.
struct BoundaryMap<'a> {
    state: &'a SlaterState<f64>,
    k: usize,
    lo: f64,
    hi: f64,
    integrand: BoundaryIntegrand,
    scale: f64,
}

impl<'a> BoundaryMap<'a> {
    fn new(state: &'a SlaterState<f64>, k: usize, cfg: &IntegrationConfig) -> Self {
        let top = *state.occupation().last().unwrap();
        let (lo, hi) = state.source().support(top, cfg.truncation);
        Self {
            state,
            k,
            lo,
            hi,
            integrand: cfg.integrand,
            scale: factorial::<f64>(state.particles()),
        }
    }

    fn n(&self) -> usize {
        self.state.particles()
    }

    /// Boundary integrand at an ordered configuration with slots `k-1, k`
    /// (0-based) equal.
    fn value_at(&self, x: &[f64]) -> f64 {
        let i = self.k - 1;
        let d = match self.integrand {
            BoundaryIntegrand::NormalDerivative => self.state.partial(x, i),
            BoundaryIntegrand::HalfJump => {
                let g = self.state.grad(x);
                0.5 * (g[i] - g[i + 1])
            }
        };
        self.scale * d * d
    }

    /// Unit cube point -> (ordered configuration, Jacobian). Coordinate 0 is
    /// the coincidence value, then points above it, then points below it,
    /// each placed between its neighbour and the domain edge.
    fn map(&self, u: &[f64], x: &mut [f64]) -> f64 {
        let n = self.n();
        let below = self.k - 1;
        let above = n - self.k - 1;
        let z = self.lo + (self.hi - self.lo) * u[0];
        let mut jac = self.hi - self.lo;
        x[below] = z;
        x[below + 1] = z;
        let mut prev = z;
        for j in 0..above {
            let y = prev + (self.hi - prev) * u[1 + j];
            jac *= self.hi - prev;
            x[below + 2 + j] = y;
            prev = y;
        }
        prev = z;
        for j in 0..below {
            let y = prev - (prev - self.lo) * u[1 + above + j];
            jac *= prev - self.lo;
            x[below - 1 - j] = y;
            prev = y;
        }
        jac
    }
}

fn composite_nodes(rule: &Rule, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(panels * rule.nodes.len());
    let mut weights = Vec::with_capacity(panels * rule.nodes.len());
    let h = 1.0 / panels as f64;
    for p in 0..panels {
        let a = p as f64 * h;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push(a + 0.5 * h * (t + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}

fn tensor_integral(map: &BoundaryMap<'_>, rule: &Rule, depth: u32) -> f64 {
    let dims = map.n() - 1;
    let (nodes, weights) = composite_nodes(rule, 1 << depth);
    let m = nodes.len();
    let partials: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i0| {
            let mut u = vec![0.0; dims];
            let mut x = vec![0.0; map.n()];
            let mut idx = vec![0usize; dims];
            idx[0] = i0;
            let mut acc = 0.0;
            loop {
                let mut w = 1.0;
                for d in 0..dims {
                    u[d] = nodes[idx[d]];
                    w *= weights[idx[d]];
                }
                let jac = map.map(&u, &mut x);
                acc += w * jac * map.value_at(&x);
                // odometer over dims 1..
                let mut d = 1;
                loop {
                    if d == dims {
                        return acc;
                    }
                    idx[d] += 1;
                    if idx[d] < m {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
            }
        })
        .collect();
    partials.iter().sum()
}

fn quadrature_gamma(map: &BoundaryMap<'_>, cfg: &IntegrationConfig) -> Result<BoundaryWeight> {
    if map.n() > 4 {
        return Err(Error::InvalidConfig(
            "tensor quadrature supports at most 4 particles".into(),
        ));
    }
    let rule = gauss_legendre(cfg.gauss_order.max(2));
    let trunc = map.scale * cfg.truncation;
    let mut prev = tensor_integral(map, &rule, 0);
    let mut err = f64::INFINITY;
    for depth in 1..=cfg.max_depth {
        let cur = tensor_integral(map, &rule, depth);
        err = (cur - prev).abs() + trunc;
        prev = cur;
        if err <= cfg.quad_tolerance {
            return Ok(BoundaryWeight {
                k: map.k,
                value: cur,
                error: err,
                method: MethodTag::Quadrature,
            });
        }
    }
    Err(Error::ToleranceNotReached {
        estimate: prev,
        achieved: err,
        tolerance: cfg.quad_tolerance,
    })
}

/// Gaussian proposal matched to the spread of the occupied orbitals.
pub(crate) fn proposal(state: &SlaterState<f64>, lo: f64, hi: f64) -> Normal {
    let rule = gauss_legendre(64);
    let panels = 32;
    let width = (hi - lo) / panels as f64;
    let src = state.source();
    let mut mean = 0.0;
    let mut spread: f64 = 0.0;
    let moments: Vec<(f64, f64)> = state
        .occupation()
        .iter()
        .map(|&n| {
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for p in 0..panels {
                let a = lo + p as f64 * width;
                m1 += rule.integrate(a, a + width, |x| x * src.eval(n, x).0.powi(2));
                m2 += rule.integrate(a, a + width, |x| x * x * src.eval(n, x).0.powi(2));
            }
            (m1, m2)
        })
        .collect();
    for (m1, _) in &moments {
        mean += m1 / moments.len() as f64;
    }
    for (_, m2) in &moments {
        spread = spread.max((m2 - mean * mean).max(0.0).sqrt());
    }
    Normal::new(mean, 1.25 * spread.max(0.6)).expect("valid proposal")
}

fn monte_carlo_gamma(map: &BoundaryMap<'_>, cfg: &IntegrationConfig) -> Result<BoundaryWeight> {
    let n = map.n();
    let below = map.k - 1;
    let above = n - map.k - 1;
    let q = proposal(map.state, map.lo, map.hi);
    let (mu, sigma) = (q.mean().unwrap(), q.std_dev().unwrap());
    let multiplicity = factorial::<f64>(below) * factorial::<f64>(above);
    let total = cfg.samples.max(2);
    let (lo, hi) = (map.lo, map.hi);

    let shards = run_shards(total, cfg.shards, cfg.seed, map.k as u64, |_, range, rng| {
        let mut acc = Moments::default();
        let mut others = vec![0.0; n - 2];
        let mut x = vec![0.0; n];
        for j in range {
            let u = (j as f64 + rng.gen::<f64>()) / total as f64;
            let z = q.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
            let mut density = q.pdf(z);
            let mut count_below = 0;
            let mut inside = (lo..=hi).contains(&z);
            for y in others.iter_mut() {
                let s: f64 = rng.sample(StandardNormal);
                *y = mu + sigma * s;
                density *= q.pdf(*y);
                inside &= (lo..=hi).contains(y);
                if *y < z {
                    count_below += 1;
                }
            }
            if !inside || count_below != below || density == 0.0 {
                acc.push(0.0);
                continue;
            }
            others.sort_by(f64::total_cmp);
            x[..below].copy_from_slice(&others[..below]);
            x[below] = z;
            x[below + 1] = z;
            x[below + 2..].copy_from_slice(&others[below..]);
            acc.push(map.value_at(&x) / (density * multiplicity));
        }
        acc
    });
    let m = shards.into_iter().fold(Moments::default(), Moments::merge);
    let err = m.std_error() + map.scale * cfg.truncation;
    if !(err <= cfg.mc_tolerance) {
        return Err(Error::ToleranceNotReached {
            estimate: m.mean,
            achieved: err,
            tolerance: cfg.mc_tolerance,
        });
    }
    Ok(BoundaryWeight {
        k: map.k,
        value: m.mean,
        error: err,
        method: MethodTag::MonteCarlo,
    })
}

/// `γ_k` for one boundary.
pub fn gamma(state: &SlaterState<f64>, k: usize, cfg: &IntegrationConfig) -> Result<BoundaryWeight> {
    let n = state.particles();
    if n < 2 {
        return Err(Error::ParticleCount(n));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidBoundary { k, n });
    }
    let map = BoundaryMap::new(state, k, cfg);
    let method = match cfg.method {
        Method::Auto if n <= 3 => Method::Quadrature,
        Method::Auto => Method::MonteCarlo,
        m => m,
    };
    let w = match method {
        Method::MonteCarlo => monte_carlo_gamma(&map, cfg)?,
        _ => quadrature_gamma(&map, cfg)?,
    };
    if !(w.value > 0.0) {
        return Err(Error::NonPositiveWeight { k, value: w.value });
    }
    Ok(w)
}

/// `γ_1 .. γ_{N-1}`, mirroring `γ_{N-k} = γ_k` on symmetric traps when enabled.
pub fn all_gammas(state: &SlaterState<f64>, cfg: &IntegrationConfig) -> Result<Vec<BoundaryWeight>> {
    let n = state.particles();
    if n < 2 {
        return Err(Error::ParticleCount(n));
    }
    let mirror = cfg.use_parity && state.source().is_parity_symmetric();
    let mut out: Vec<BoundaryWeight> = Vec::with_capacity(n - 1);
    for k in 1..n {
        if mirror && k > n - k {
            let twin = out[n - k - 1];
            out.push(BoundaryWeight { k, ..twin });
        } else {
            out.push(gamma(state, k, cfg)?);
        }
    }
    Ok(out)
}

/// Weights with `γ_k` and `γ_{N-k}` replaced by their mean.
pub fn symmetrized(weights: &[BoundaryWeight]) -> Vec<BoundaryWeight> {
    let m = weights.len();
    (0..m)
        .map(|i| {
            let j = m - 1 - i;
            BoundaryWeight {
                value: 0.5 * (weights[i].value + weights[j].value),
                error: weights[i].error.max(weights[j].error),
                ..weights[i]
            }
        })
        .collect()
}
