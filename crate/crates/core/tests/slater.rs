use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use tonks_core::quadrature::gauss_legendre;
use tonks_core::{HarmonicOscillator, OrbitalSource, Slater32, Slater64, SlaterState};

fn ho() -> Arc<dyn OrbitalSource<f64>> {
    Arc::new(HarmonicOscillator::unit())
}

/// Closed form of the harmonic ground determinant: `C Π_{i<j}(x_j − x_i) e^{−Σx²/2}`
/// with `C = Π_n (2^n / √(2^n n! √π)) / √N!`.
fn vandermonde_ground(x: &[f64]) -> f64 {
    let n = x.len();
    let mut c = 1.0;
    let mut fact = 1.0;
    for k in 0..n {
        if k > 0 {
            fact *= k as f64;
        }
        let two_k = 2f64.powi(k as i32);
        c *= two_k / (two_k * fact * PI.sqrt()).sqrt();
    }
    c /= fact_of(n).sqrt();
    let mut v = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            v *= x[j] - x[i];
        }
    }
    c * v * (-0.5 * x.iter().map(|t| t * t).sum::<f64>()).exp()
}

fn fact_of(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn ground_determinant_matches_vandermonde() {
    for n in 2..=5 {
        let s = SlaterState::make_level(ho(), 0, n).unwrap();
        for t in 0..20 {
            let x: Vec<f64> = (0..n).map(|i| ((t * 7 + i * 13) % 17) as f64 * 0.23 - 1.9).collect();
            let want = vandermonde_ground(&x);
            let got = s.eval(&x);
            assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "n={n} x={x:?}: {got} vs {want}");
        }
    }
}

#[test]
fn gradient_matches_finite_difference() {
    let s = Slater64::new(ho(), vec![0, 2, 3]).unwrap();
    let h = 1e-5;
    for x in [[-0.7, 0.2, 1.3], [0.0, 0.4, -2.1], [1.1, -1.2, 0.05]] {
        let g = s.grad(&x);
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (s.eval(&xp) - s.eval(&xm)) / (2.0 * h);
            assert!((g[i] - fd).abs() <= 1e-8, "∂_{i} at {x:?}: {} vs {fd}", g[i]);
            assert!((s.partial(&x, i) - g[i]).abs() <= 1e-14);
        }
        let (v, g2) = s.eval_with_grad(&x);
        assert_eq!(v, s.eval(&x));
        assert_eq!(g, g2);
    }
}

#[test]
fn gradient_is_normal_on_the_boundary() {
    // Ψ vanishes on x_i = x_j, so the gradient there has ∂_i = −∂_j
    let s = SlaterState::make_level(ho(), 0, 3).unwrap();
    for (y, z) in [(0.3, -1.0), (1.7, 0.2), (-0.4, 2.5)] {
        let x = [y, y, z];
        assert!(s.eval(&x).abs() <= 1e-15);
        let g = s.grad(&x);
        assert!((g[0] + g[1]).abs() <= 1e-13, "{g:?}");
        assert!(g[0].abs() > 1e-6);
    }
}

#[test]
fn normalized_over_the_plane() {
    let s = SlaterState::make_level(ho(), 0, 2).unwrap();
    let rule = gauss_legendre(20);
    let panels = 16;
    let (a, b) = (-8.0, 8.0);
    let w = (b - a) / panels as f64;
    let mut nodes = Vec::new();
    for p in 0..panels {
        let x0 = a + p as f64 * w;
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push((x0 + 0.5 * w * (t + 1.0), 0.5 * w * wt));
        }
    }
    let mut total = 0.0;
    let mut ordered = 0.0;
    for &(x, wx) in &nodes {
        for &(y, wy) in &nodes {
            let v = s.eval(&[x, y]);
            total += wx * wy * v * v;
            if x < y {
                ordered += wx * wy * v * v;
            }
        }
    }
    assert!((total - 1.0).abs() <= 1e-10, "{total}");
    // the ordered sector holds 1/N! of the norm (up to the diagonal cut)
    assert!((ordered - s.sector_norm()).abs() <= 1e-3, "{ordered}");
}

#[test]
fn normalized_in_three_dimensions() {
    let s = SlaterState::make_level(ho(), 0, 3).unwrap();
    let rule = gauss_legendre(16);
    let panels = 6;
    let (a, b) = (-7.0, 7.0);
    let w = (b - a) / panels as f64;
    let mut nodes = Vec::new();
    for p in 0..panels {
        let x0 = a + p as f64 * w;
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push((x0 + 0.5 * w * (t + 1.0), 0.5 * w * wt));
        }
    }
    let mut total = 0.0;
    for &(x, wx) in &nodes {
        for &(y, wy) in &nodes {
            for &(z, wz) in &nodes {
                let v = s.eval(&[x, y, z]);
                total += wx * wy * wz * v * v;
            }
        }
    }
    assert!((total - 1.0).abs() <= 1e-8, "{total}");
    assert!((s.sector_norm() - 1.0 / 6.0).abs() <= 1e-15);
}

#[test]
fn single_precision_tracks_double() {
    let s64 = SlaterState::make_level(ho(), 0, 3).unwrap();
    let src32: Arc<dyn OrbitalSource<f32>> = Arc::new(HarmonicOscillator::<f32>::unit());
    let s32 = Slater32::make_level(src32, 0, 3).unwrap();
    assert_eq!(s32.occupation(), s64.occupation());
    for x in [[-0.5f32, 0.3, 1.4], [0.9, -1.7, 0.1]] {
        let xd: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let (a, b) = (s32.eval(&x) as f64, s64.eval(&xd));
        assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn rejects_bad_occupations() {
    assert!(Slater64::new(ho(), vec![]).is_err());
    assert!(Slater64::new(ho(), vec![1, 1]).is_err());
    assert!(Slater64::new(ho(), vec![2, 1]).is_err());
    let capped: Arc<dyn OrbitalSource<f64>> = Arc::new(HarmonicOscillator::unit().with_cap(4));
    assert!(Slater64::new(capped.clone(), vec![0, 4]).is_ok());
    assert!(Slater64::new(capped, vec![0, 5]).is_err());
}

proptest! {
    #[test]
    fn swapping_two_coordinates_flips_the_sign(
        x in prop::collection::vec(-3.0f64..3.0, 4),
        i in 0usize..4,
        j in 0usize..4,
    ) {
        prop_assume!(i != j);
        let s = Slater64::new(ho(), vec![0, 1, 3, 4]).unwrap();
        let mut y = x.clone();
        y.swap(i, j);
        let (a, b) = (s.eval(&x), s.eval(&y));
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
