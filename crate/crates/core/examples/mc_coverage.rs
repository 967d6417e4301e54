//! Coverage of the Monte Carlo boundary-weight error bar over many seeds.
//!
//! For an unbiased estimator with a correct standard error, about 68% of
//! seeds land within one error bar of the quadrature value.

use std::sync::Arc;

use tonks_core::trap::{HarmonicOscillator, OrbitalSource};
use tonks_core::weights::{gamma, IntegrationConfig, Method};
use tonks_core::SlaterState;

fn main() {
    let src: Arc<dyn OrbitalSource<f64>> = Arc::new(HarmonicOscillator::unit());
    let state = SlaterState::make_level(src, 0, 3).unwrap();
    let quad_cfg = IntegrationConfig {
        method: Method::Quadrature,
        ..Default::default()
    };
    let reference = gamma(&state, 1, &quad_cfg).unwrap().value;
    let seeds = 40u64;
    let z: Vec<f64> = (0..seeds)
        .map(|seed| {
            let cfg = IntegrationConfig {
                method: Method::MonteCarlo,
                samples: 1_000_000,
                mc_tolerance: 1.0,
                seed,
                ..Default::default()
            };
            let w = gamma(&state, 1, &cfg).unwrap();
            (w.value - reference) / w.error
        })
        .collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
    let inside = z.iter().filter(|v| v.abs() <= 1.0).count();
    println!("reference γ1 = {reference:.12}");
    println!("z = (MC − reference)/error over {seeds} seeds: mean {mean:.3}, sd {sd:.3}, |z| ≤ 1 for {inside}");
}
