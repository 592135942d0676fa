//! Pick the bi-scaled split point and level budget, then show the codebook.

use heavytail::quant::TwoStageQuantizer;
use heavytail::solver::{best_k, q_n, q_u, split_levels_biscaled, MassModel};
use heavytail::{PowerLawTail, TailModelDensity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tail = PowerLawTail::new(3.4, 1.0, 0.15)?;
    let model = TailModelDensity::flat_body(tail);
    let m = MassModel::Density(&model);
    let alpha = 4.0;
    let bits = 4;
    let s = (1usize << bits) - 1;

    let (k, qb) = best_k(alpha, m);
    println!(
        "alpha = {alpha}: Q_U = {:.4}, Q_N = {:.4}, Q_B(k* = {k:.2}) = {qb:.4}",
        q_u(alpha, m),
        q_n(alpha, m)
    );

    let split = split_levels_biscaled(s, k, alpha, m)?;
    println!(
        "split of s = {s}: outer {:.2} -> {}, inner {:.2} -> {}",
        split.s_alpha_real, split.s_alpha, split.s_beta_real, split.s_beta
    );

    let q = TwoStageQuantizer::biscaled(alpha, bits, k, split.s_alpha as u16, split.s_beta as u16)?;
    let levels = q.codebook().levels();
    println!("levels:");
    for w in levels.windows(2) {
        println!("  {:>8.4} .. {:>8.4}  width {:.4}", w[0], w[1], w[1] - w[0]);
    }
    Ok(())
}
