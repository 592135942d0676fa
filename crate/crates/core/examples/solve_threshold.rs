//! Optimal truncation threshold for each scheme across bit budgets.

use heavytail::solver::{error_tq, solve_alpha, MassModel, QuantPlan, Scheme, SolverError, SolverOptions};
use heavytail::{PowerLawTail, TailModelDensity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tail = PowerLawTail::new(3.6, 0.05, 0.1)?;
    let model = TailModelDensity::flat_body(tail);
    let opts = SolverOptions::default();
    println!("tail: gamma={} g_min={} rho={}\n", tail.gamma, tail.g_min, tail.rho);
    println!(
        "{:>4} {:>11} {:>10} {:>8} {:>11} {:>5}",
        "bits", "scheme", "alpha", "Q", "E_TQ", "iters"
    );

    for bits in 2..=8u32 {
        let s = (1usize << bits) - 1;
        for scheme in [Scheme::Uniform, Scheme::NonUniform, Scheme::BiScaled] {
            match solve_alpha(scheme, &tail, s, MassModel::Density(&model), &opts) {
                Ok(r) => {
                    let e = error_tq(
                        &QuantPlan::from_result(&r),
                        &tail,
                        r.alpha,
                        1,
                        1,
                        MassModel::Density(&model),
                    )?;
                    println!(
                        "{bits:>4} {:>11} {:>10.5} {:>8.4} {:>11.4e} {:>5}",
                        format!("{scheme:?}"),
                        r.alpha,
                        r.q_value,
                        e.e_tq,
                        r.iterations
                    );
                }
                Err(SolverError::AlphaBelowGmin { alpha, .. }) => {
                    println!(
                        "{bits:>4} {:>11} {alpha:>10.5}  below g_min, tail model does not apply",
                        format!("{scheme:?}")
                    );
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(())
}
