//! Fit a power-law tail to a gradient dump.
//!
//! ```text
//! cargo run --example fit_tail                 # synthetic heavy-tailed gradients
//! cargo run --example fit_tail -- grads.f32    # your own dump (f32 LE or one-column CSV)
//! ```

use std::path::Path;

use heavytail::density::Density;
use heavytail::sim::spliced_density;
use heavytail::{fit_tail, TailFitOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian body with 10% of the draws replaced by a γ = 3.8 power law
/// starting at 1.6.
fn synthetic(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.1 {
                let u: f64 = 1.0 - rng.random::<f64>();
                let m = 1.6 * u.powf(-1.0 / 2.8);
                if rng.random() {
                    m
                } else {
                    -m
                }
            } else {
                let z: f64 = rng.sample(StandardNormal);
                z.clamp(-1.6, 1.6)
            }
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let values = match std::env::args().nth(1) {
        Some(path) => heavytail::io::read_gradients(Path::new(&path))?,
        None => synthetic(200_000),
    };

    for quantile in [0.8, 0.9, 0.95] {
        let tail = fit_tail(&values, &TailFitOptions { quantile })?;
        println!(
            "q={quantile:.2}  gamma={:.3}  g_min={:.4}  rho={:.4}  n_tail={}{}",
            tail.gamma,
            tail.g_min,
            tail.rho,
            tail.n_tail,
            if tail.clamped { "  (clamped)" } else { "" }
        );
    }

    let tail = fit_tail(&values, &TailFitOptions::default())?;
    let density = spliced_density(&values, &tail, 512);
    println!("\nspliced density: empirical body inside g_min, fitted tails outside");
    for k in [1.0, 2.0, 4.0, 8.0] {
        let a = k * tail.g_min;
        let empirical = values.iter().filter(|v| v.abs() <= a).count() as f64 / values.len() as f64;
        println!(
            "  mass in [-{a:.3}, {a:.3}]: model {:.4}  empirical {:.4}",
            density.mass(-a, a),
            empirical
        );
    }
    Ok(())
}
