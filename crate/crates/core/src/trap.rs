//! External traps and their single-particle eigenorbitals.
//!
//! Units: ħ = m = 1 throughout. For the harmonic trap with ω = 1 lengths are
//! in oscillator lengths and energies in ħω.

use std::fmt::Debug;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SymTridiagonal;
use crate::num::Real;

/// Largest harmonic orbital index the normalized recurrence is validated for.
pub const HARMONIC_INDEX_CAP: usize = 200;

/// Anything that can hand out single-particle orbitals with values and slopes.
pub trait OrbitalSource<T: Real>: Send + Sync + Debug {
    /// Single-particle energy of orbital `n`.
    fn energy(&self, n: usize) -> T;

    /// Number of orbitals this source can produce.
    fn available(&self) -> usize;

    /// `(φ_n(x), φ_n'(x))`.
    fn eval(&self, n: usize, x: T) -> (T, T);

    /// Values and derivatives of several orbitals at one point.
    fn eval_set(&self, indices: &[usize], x: T, values: &mut [T], derivs: &mut [T]) {
        for (j, &n) in indices.iter().enumerate() {
            let (v, d) = self.eval(n, x);
            values[j] = v;
            derivs[j] = d;
        }
    }

    /// True when `V(-x) = V(x)`, so every orbital has definite parity.
    fn is_parity_symmetric(&self) -> bool;

    /// Interval outside of which orbitals `0..=highest` are all below `threshold`.
    fn support(&self, highest: usize, threshold: T) -> (T, T);
}

/// One eigenorbital handed out by a source.
#[derive(Debug, Clone)]
pub struct Orbital<T: Real> {
    pub index: usize,
    pub energy: T,
    source: Arc<dyn OrbitalSource<T>>,
}

impl<T: Real> Orbital<T> {
    pub fn new(source: Arc<dyn OrbitalSource<T>>, index: usize) -> Result<Self> {
        if index >= source.available() {
            return Err(Error::OrbitalIndexTooLarge {
                index,
                cap: source.available().saturating_sub(1),
            });
        }
        Ok(Self {
            index,
            energy: source.energy(index),
            source,
        })
    }

    pub fn eval(&self, x: T) -> (T, T) {
        self.source.eval(self.index, x)
    }
}

/// Harmonic oscillator `V(x) = ω² x² / 2`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicOscillator<T> {
    omega: T,
    cap: usize,
}

impl<T: Real> HarmonicOscillator<T> {
    pub fn new(omega: T) -> Result<Self> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::InvalidTrap(format!("harmonic frequency must be positive, got {omega}")));
        }
        Ok(Self {
            omega,
            cap: HARMONIC_INDEX_CAP,
        })
    }

    /// ω = 1, the unit system used everywhere else.
    pub fn unit() -> Self {
        Self {
            omega: T::one(),
            cap: HARMONIC_INDEX_CAP,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn orbital(self, n: usize) -> Result<Orbital<T>> {
        Orbital::new(Arc::new(self), n)
    }

    fn scaled(&self, x: T) -> (T, T) {
        let s = self.omega.sqrt();
        (x * s, self.omega.sqrt().sqrt())
    }
}

/// The `n`-th orbital of the unit harmonic oscillator.
pub fn harmonic_orbital<T: Real>(n: usize) -> Result<Orbital<T>> {
    HarmonicOscillator::unit().orbital(n)
}

/// Hermite functions `h_0(x) .. h_{len-1}(x)` via the normalized three-term
/// recurrence `h_{k+1} = sqrt(2/(k+1)) x h_k - sqrt(k/(k+1)) h_{k-1}`.
pub fn hermite_functions<T: Real>(len: usize, x: T, out: &mut Vec<T>) {
    hermite_recurrence(len, x, (-x * x / T::lit(2.0)).exp(), out)
}

/// Same recurrence without the Gaussian factor: `h_k(x) exp(x²/2)`.
pub fn hermite_polynomials_normalized<T: Real>(len: usize, x: T, out: &mut Vec<T>) {
    hermite_recurrence(len, x, T::one(), out)
}

fn hermite_recurrence<T: Real>(len: usize, x: T, gauss: T, out: &mut Vec<T>) {
    out.clear();
    if len == 0 {
        return;
    }
    let two = T::lit(2.0);
    out.push(T::PI().powf(T::lit(-0.25)) * gauss);
    if len > 1 {
        out.push(two.sqrt() * x * out[0]);
    }
    for k in 1..len.saturating_sub(1) {
        let kf = T::from_usize_lossy(k);
        let next = (two / (kf + T::one())).sqrt() * x * out[k] - (kf / (kf + T::one())).sqrt() * out[k - 1];
        out.push(next);
    }
}

impl<T: Real> OrbitalSource<T> for HarmonicOscillator<T> {
    fn energy(&self, n: usize) -> T {
        self.omega * (T::from_usize_lossy(n) + T::lit(0.5))
    }

    fn available(&self) -> usize {
        self.cap + 1
    }

    fn eval(&self, n: usize, x: T) -> (T, T) {
        let mut buf = Vec::with_capacity(n + 1);
        let (xi, amp) = self.scaled(x);
        hermite_functions(n + 1, xi, &mut buf);
        let h = buf[n];
        let hp = if n > 0 {
            (T::lit(2.0) * T::from_usize_lossy(n)).sqrt() * buf[n - 1] - xi * h
        } else {
            -xi * h
        };
        (amp * h, amp * self.omega.sqrt() * hp)
    }

    fn eval_set(&self, indices: &[usize], x: T, values: &mut [T], derivs: &mut [T]) {
        let top = indices.iter().copied().max().unwrap_or(0);
        let mut buf = Vec::with_capacity(top + 1);
        let (xi, amp) = self.scaled(x);
        hermite_functions(top + 1, xi, &mut buf);
        let two = T::lit(2.0);
        let sw = self.omega.sqrt();
        for (j, &n) in indices.iter().enumerate() {
            let h = buf[n];
            let hp = if n > 0 {
                (two * T::from_usize_lossy(n)).sqrt() * buf[n - 1] - xi * h
            } else {
                -xi * h
            };
            values[j] = amp * h;
            derivs[j] = amp * sw * hp;
        }
    }

    fn is_parity_symmetric(&self) -> bool {
        true
    }

    fn support(&self, highest: usize, threshold: T) -> (T, T) {
        let step = T::lit(0.05) / self.omega.sqrt();
        let mut r = (T::from_usize_lossy(2 * highest + 1) / self.omega).sqrt();
        let mut buf = Vec::new();
        loop {
            let (xi, amp) = self.scaled(r);
            hermite_functions(highest + 1, xi, &mut buf);
            if buf.iter().all(|&h| (amp * h).abs() < threshold) {
                return (-r, r);
            }
            r = r + step;
        }
    }
}

/// A potential sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

pub const MIN_GRID_POINTS: usize = 64;

impl TabulatedPotential {
    pub fn from_samples(xs: &[f64], vs: &[f64]) -> Result<Self> {
        if xs.len() != vs.len() {
            return Err(Error::InvalidTrap("x and V columns differ in length".into()));
        }
        if xs.len() < MIN_GRID_POINTS {
            return Err(Error::InvalidTrap(format!(
                "need at least {MIN_GRID_POINTS} grid points, got {}",
                xs.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrap("grid must be strictly increasing".into()));
        }
        if xs.iter().chain(vs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrap("grid and potential must be finite".into()));
        }
        let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (i, &x) in xs.iter().enumerate() {
            if (x - (xs[0] + i as f64 * dx)).abs() > 1e-6 * dx {
                return Err(Error::InvalidTrap(format!("grid is not uniform near x = {x}")));
            }
        }
        Ok(Self {
            x0: xs[0],
            dx,
            values: vs.to_vec(),
        })
    }

    /// Samples `f` at `points` equally spaced nodes on `[a, b]`.
    pub fn from_fn(a: f64, b: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (b - a) / (points.max(2) - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| a + i as f64 * h).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        Self::from_samples(&xs, &vs)
    }

    /// Two whitespace-separated columns `x V(x)`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |c: Option<&str>| -> Result<f64> {
                c.ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: "expected two columns".into(),
                })?
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: e.to_string(),
                })
            };
            let x = parse(cols.next())?;
            let v = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected exactly two columns".into(),
                });
            }
            xs.push(x);
            vs.push(v);
        }
        Self::from_samples(&xs, &vs)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.len() - 1)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lower of the two end values.
    pub fn wall_height(&self) -> f64 {
        self.values[0].min(self.values[self.len() - 1])
    }

    pub fn check_confining(&self, margin: f64) -> Result<()> {
        let depth = self.wall_height() - self.min_value();
        if depth > margin {
            Ok(())
        } else {
            Err(Error::NotConfining(format!(
                "end values exceed the minimum by {depth}, need more than {margin}"
            )))
        }
    }

    pub fn is_parity_symmetric(&self) -> bool {
        let n = self.len();
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        (self.x0 + self.x_end()).abs() <= 1e-9 * self.dx
            && (0..n).all(|i| (self.values[i] - self.values[n - 1 - i]).abs() <= 1e-10 * scale)
    }

    /// Catmull–Rom interpolation of the samples. Exact for quadratics.
    pub fn interpolate(&self, x: f64) -> f64 {
        let slopes = |i: usize| -> f64 {
            let n = self.len();
            let v = &self.values;
            if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * self.dx)
            } else if i == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * self.dx)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * self.dx)
            }
        };
        let t = ((x - self.x0) / self.dx).clamp(0.0, (self.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.len() - 2);
        let s = t - i as f64;
        hermite_cubic(
            self.values[i],
            self.values[i + 1],
            slopes(i) * self.dx,
            slopes(i + 1) * self.dx,
            s,
        )
        .0
    }
}

/// Cubic Hermite segment on `[0, 1]`: returns value and d/ds.
#[inline]
fn hermite_cubic(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = -6.0 * s2 + 6.0 * s;
    let d11 = 3.0 * s2 - 2.0 * s;
    (
        h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1,
        d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1,
    )
}

/// External trap.
#[derive(Debug, Clone, PartialEq)]
pub enum Trap {
    Harmonic { omega: f64 },
    Tabulated(TabulatedPotential),
}

/// Knobs for [`solve_tabulated`].
#[derive(Debug, Clone, Copy)]
pub struct TabulatedOptions {
    /// Required rise of the end values above the potential minimum.
    pub margin: f64,
    /// Largest accepted change of the extrapolated eigenvalue between refinements.
    pub tolerance: f64,
}

impl Default for TabulatedOptions {
    fn default() -> Self {
        Self {
            margin: 5.0,
            tolerance: 1e-8,
        }
    }
}

impl Trap {
    pub fn harmonic() -> Self {
        Trap::Harmonic { omega: 1.0 }
    }

    /// Orbital source able to provide at least `count` orbitals.
    pub fn orbitals(&self, count: usize, opts: TabulatedOptions) -> Result<Arc<dyn OrbitalSource<f64>>> {
        match self {
            Trap::Harmonic { omega } => {
                let osc = HarmonicOscillator::new(*omega)?;
                if count > osc.available() {
                    return Err(Error::OrbitalIndexTooLarge {
                        index: count - 1,
                        cap: HARMONIC_INDEX_CAP,
                    });
                }
                Ok(Arc::new(osc))
            }
            Trap::Tabulated(_) => Ok(Arc::new(solve_tabulated(self, count, opts)?)),
        }
    }

    pub fn is_parity_symmetric(&self) -> bool {
        match self {
            Trap::Harmonic { .. } => true,
            Trap::Tabulated(p) => p.is_parity_symmetric(),
        }
    }
}

/// Orbitals of a tabulated trap, stored on the finest grid used.
#[derive(Debug, Clone)]
pub struct TabulatedOrbitals {
    x0: f64,
    dx: f64,
    energies: Vec<f64>,
    /// `values[n][i]`; zero at both ends (hard walls).
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    /// Richardson shift achieved per state.
    pub shifts: Vec<f64>,
    symmetric: bool,
}

fn fd_hamiltonian(x0: f64, h: f64, intervals: usize, v: impl Fn(f64) -> f64) -> SymTridiagonal<f64> {
    let interior = intervals - 1;
    let kin = 1.0 / (h * h);
    SymTridiagonal {
        diag: (1..=interior).map(|i| kin + v(x0 + i as f64 * h)).collect(),
        off: vec![-0.5 * kin; interior.saturating_sub(1)],
    }
}

/// Lowest `count` eigenpairs of `-½ d²/dx² + V(x)` for a tabulated trap.
///
/// Three-point finite differences with hard walls at the grid ends, solved on
/// the given grid and two successive halvings. Energies are the Richardson
/// extrapolants of the two finest pairs; a state is rejected when those two
/// extrapolants differ by more than `opts.tolerance`.
pub fn solve_tabulated(trap: &Trap, count: usize, opts: TabulatedOptions) -> Result<TabulatedOrbitals> {
    let pot = match trap {
        Trap::Tabulated(p) => p,
        Trap::Harmonic { .. } => {
            return Err(Error::InvalidTrap("solve_tabulated needs a tabulated trap".into()))
        }
    };
    if count == 0 {
        return Err(Error::InvalidTrap("requested zero orbitals".into()));
    }
    pot.check_confining(opts.margin)?;
    let intervals0 = pot.len() - 1;
    if count + 2 > intervals0 {
        return Err(Error::InvalidTrap(format!("grid too small for {count} states")));
    }

    let levels: Vec<SymTridiagonal<f64>> = (0..3)
        .map(|lvl| {
            let factor = 1usize << lvl;
            let h = pot.dx / factor as f64;
            if lvl == 0 {
                let vals = &pot.values;
                fd_hamiltonian(pot.x0, h, intervals0, |x| {
                    let i = ((x - pot.x0) / pot.dx).round() as usize;
                    vals[i]
                })
            } else {
                fd_hamiltonian(pot.x0, h, intervals0 * factor, |x| pot.interpolate(x))
            }
        })
        .collect();

    let wall = pot.wall_height();
    let mut energies = Vec::with_capacity(count);
    let mut shifts = Vec::with_capacity(count);
    let mut finest = Vec::with_capacity(count);
    let fine_energies: Vec<f64> = (0..count).map(|k| levels[2].eigenvalue(k)).collect();
    if let Some(k) = fine_energies.iter().position(|&e| e >= wall) {
        return Err(Error::NotConfining(format!(
            "state {k} at energy {:.6} is not bound below the wall height {wall:.6}",
            fine_energies[k]
        )));
    }
    for k in 0..count {
        let e = [levels[0].eigenvalue(k), levels[1].eigenvalue(k), fine_energies[k]];
        let r1 = (4.0 * e[1] - e[0]) / 3.0;
        let r2 = (4.0 * e[2] - e[1]) / 3.0;
        let shift = (r2 - r1).abs();
        if !(shift <= opts.tolerance) {
            return Err(Error::NotConverged {
                index: k,
                achieved: shift,
                tolerance: opts.tolerance,
            });
        }
        energies.push(r2);
        shifts.push(shift);
        finest.push(e[2]);
    }

    let fine = &levels[2];
    let h = pot.dx / 4.0;
    let mut values = Vec::with_capacity(count);
    let mut slopes = Vec::with_capacity(count);
    for &lam in &finest {
        let inner = fine.eigenvector(lam);
        let mut psi = Vec::with_capacity(inner.len() + 2);
        psi.push(0.0);
        psi.extend_from_slice(&inner);
        psi.push(0.0);
        let nrm = (h * psi.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let last = psi.iter().rposition(|v| v.abs() > 1e-3 * peak).unwrap_or(0);
        let sign = if psi[last] < 0.0 { -1.0 } else { 1.0 };
        for v in &mut psi {
            *v *= sign / nrm;
        }
        let n = psi.len();
        let slope: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 {
                    (psi[1] - psi[0]) / h
                } else if i == n - 1 {
                    (psi[n - 1] - psi[n - 2]) / h
                } else {
                    (psi[i + 1] - psi[i - 1]) / (2.0 * h)
                }
            })
            .collect();
        values.push(psi);
        slopes.push(slope);
    }

    Ok(TabulatedOrbitals {
        x0: pot.x0,
        dx: h,
        energies,
        values,
        slopes,
        shifts,
        symmetric: pot.is_parity_symmetric(),
    })
}

impl TabulatedOrbitals {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Grid nodes of the finest grid.
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let x0 = self.x0;
        let dx = self.dx;
        (0..self.values[0].len()).map(move |i| x0 + i as f64 * dx)
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    /// Nodal values of orbital `n` on the finest grid.
    pub fn nodal_values(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    fn x_end(&self) -> f64 {
        self.x0 + (self.values[0].len() - 1) as f64 * self.dx
    }
}

impl OrbitalSource<f64> for TabulatedOrbitals {
    fn energy(&self, n: usize) -> f64 {
        self.energies[n]
    }

    fn available(&self) -> usize {
        self.energies.len()
    }

    fn eval(&self, n: usize, x: f64) -> (f64, f64) {
        if !(x >= self.x0 && x <= self.x_end()) {
            return (0.0, 0.0);
        }
        let vals = &self.values[n];
        let t = (x - self.x0) / self.dx;
        let i = (t.floor() as usize).min(vals.len() - 2);
        let s = t - i as f64;
        let sl = &self.slopes[n];
        let (v, dv) = hermite_cubic(vals[i], vals[i + 1], sl[i] * self.dx, sl[i + 1] * self.dx, s);
        (v, dv / self.dx)
    }

    fn is_parity_symmetric(&self) -> bool {
        self.symmetric
    }

    fn support(&self, highest: usize, threshold: f64) -> (f64, f64) {
        let n = self.values[0].len();
        let significant = |i: usize| self.values[..=highest].iter().any(|v| v[i].abs() >= threshold);
        let lo = (0..n).find(|&i| significant(i)).unwrap_or(0).saturating_sub(1);
        let hi = (0..n).rev().find(|&i| significant(i)).map_or(n - 1, |i| (i + 1).min(n - 1));
        (self.x0 + lo as f64 * self.dx, self.x0 + hi as f64 * self.dx)
    }
}
