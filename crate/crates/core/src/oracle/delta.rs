use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite;
use crate::trap::hermite_polynomials_normalized;

pub const MAX_ORBITALS: usize = 60;

/// `I_abcd = ∫ φ_a φ_b φ_c φ_d dx` for harmonic orbitals `0..n`.
///
/// Stored as a symmetric matrix over unordered pairs `{a,b}` × `{c,d}`, so
/// the symmetries `a↔b`, `c↔d` and `(ab)↔(cd)` hold exactly. Entries with odd
/// `a+b+c+d` are exactly zero.
#[derive(Debug, Clone)]
pub struct DeltaTensor {
    n: usize,
    pairs: usize,
    table: Vec<f64>,
}

fn pair_index(a: usize, b: usize) -> usize {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    hi * (hi + 1) / 2 + lo
}

impl DeltaTensor {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_ORBITALS {
            return Err(Error::InvalidConfig(format!(
                "delta tensor needs 1..={MAX_ORBITALS} orbitals, got {n}"
            )));
        }
        // Substituting x = y/√2 turns the integrand into exp(-y²) times a
        // polynomial of degree 4(n-1); 2n+1 nodes integrate it exactly.
        let rule = gauss_hermite(2 * n + 1);
        let pairs = n * (n + 1) / 2;
        let nodes = rule.nodes.len();
        // p[pair][node] = sqrt(w_i) h_a h_b at y_i/√2
        let mut p = vec![0.0; pairs * nodes];
        let mut h = Vec::with_capacity(n);
        for (i, (&y, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            hermite_polynomials_normalized(n, y / std::f64::consts::SQRT_2, &mut h);
            let sw = w.sqrt();
            for b in 0..n {
                for a in 0..=b {
                    p[pair_index(a, b) * nodes + i] = sw * h[a] * h[b];
                }
            }
        }
        let parity: Vec<usize> = (0..n)
            .flat_map(|b| (0..=b).map(move |a| (a + b) % 2))
            .collect();
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let mut table = vec![0.0; pairs * pairs];
        for r in 0..pairs {
            let pr = &p[r * nodes..(r + 1) * nodes];
            for c in r..pairs {
                if parity[r] != parity[c] {
                    continue;
                }
                let pc = &p[c * nodes..(c + 1) * nodes];
                let v = scale * pr.iter().zip(pc).map(|(x, y)| x * y).sum::<f64>();
                table[r * pairs + c] = v;
                table[c * pairs + r] = v;
            }
        }
        Ok(Self { n, pairs, table })
    }

    pub fn orbitals(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.table[pair_index(a, b) * self.pairs + pair_index(c, d)]
    }
}
