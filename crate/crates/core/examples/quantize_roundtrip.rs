//! Truncate, quantize, frame, and decode one gradient block, then compare
//! the observed error with the analytic bound.

use heavytail::density::DensityHistogram;
use heavytail::quant::{
    decompress, empirical_mse, mse_bound, truncate, QuantizedMessage, TwoStageQuantizer, WireScheme,
};
use heavytail::sim::SymmetricPareto;
use heavytail::TailModelDensity;
use heavytail::{fit_tail, TailFitOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise = SymmetricPareto::with_variance(3.5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g: Vec<f64> = (0..100_000).map(|_| noise.sample(&mut rng)).collect();
    let alpha = 3.0;
    let bits = 4;

    let tail = fit_tail(&g, &TailFitOptions::default())?;
    let model = TailModelDensity::flat_body(tail);
    let quantizers = [
        TwoStageQuantizer::uniform(WireScheme::TqUniform, alpha, bits)?,
        TwoStageQuantizer::cube_root(WireScheme::Tnq, alpha, bits, &model)?,
        TwoStageQuantizer::biscaled(alpha, bits, 0.3, 6, 9)?,
    ];

    let clipped = truncate(&g, alpha)?;
    let hist = DensityHistogram::from_samples(&clipped, 1024, false);
    println!("d = {}, alpha = {alpha}, b = {bits}", g.len());
    for q in &quantizers {
        let bytes = q.compress(&clipped, 42)?.to_bytes();
        let msg = QuantizedMessage::from_bytes(&bytes)?;
        let decoded = decompress(&msg, q.codebook())?;
        let mse = empirical_mse(&clipped, &decoded)?;
        let bound = mse_bound(q.codebook(), &hist)?;
        println!(
            "{:?}: {} bytes ({:.2} bits/elem)  mse {:.3e}  bound/4 {:.3e}  high-rate/6 {:.3e}",
            q.scheme(),
            bytes.len(),
            8.0 * bytes.len() as f64 / g.len() as f64,
            mse,
            bound.quarter,
            bound.highrate_sixth,
        );
    }
    Ok(())
}
