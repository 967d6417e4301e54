use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Coupling that produces relative energy `e` on the lowest even branch:
/// `g = −2√2 Γ(3/4 − e/2) / Γ(1/4 − e/2)`, increasing from 0 at `e = 1/2`
/// to `+∞` at `e = 3/2`.
pub fn coupling_for_relative_energy(e: f64) -> f64 {
    -2.0 * std::f64::consts::SQRT_2 * gamma(0.75 - 0.5 * e) / gamma(0.25 - 0.5 * e)
}

/// Ground-state energy of two particles in the unit harmonic trap with
/// contact coupling `g > 0`: the relative energy from the branch above plus
/// the centre-of-mass zero point `1/2`.
pub fn two_body_reference(g: f64) -> Result<f64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::Bracketing(format!("coupling must be positive and finite, got {g}")));
    }
    let f = |e: f64| coupling_for_relative_energy(e) - g;
    let (mut lo, mut hi) = (0.5 + 1e-15, 1.5 - 1e-15);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::Bracketing(format!(
            "no sign change on the ground branch for g = {g} (f = {flo:.3e}, {fhi:.3e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(Error::Bracketing(format!("non-finite residual at e = {mid}")));
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) + 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        assert!((two_body_reference(1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!((two_body_reference(1e9).unwrap() - 2.0).abs() < 1e-8);
        assert!(two_body_reference(0.0).is_err());
        assert!(two_body_reference(-1.0).is_err());
    }

    #[test]
    fn monotone_in_coupling() {
        let e: Vec<f64> = [0.1, 1.0, 5.0, 20.0, 100.0]
            .iter()
            .map(|&g| two_body_reference(g).unwrap())
            .collect();
        assert!(e.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn weak_coupling_first_order() {
        // E ≈ 1 + g I_0000 for the noninteracting ground pair
        let g = 1e-4;
        let e = two_body_reference(g).unwrap();
        let first = g / (2.0 * std::f64::consts::PI).sqrt();
        assert!(((e - 1.0) - first).abs() < 1e-3 * first);
    }
}
