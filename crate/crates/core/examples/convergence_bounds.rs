//! Convergence-error bounds for each scheme, and how the quantization term
//! shrinks with the level count.

use heavytail::solver::{convergence_bound, MassModel, ProblemSpec, Scheme, SolverOptions};
use heavytail::{PowerLawTail, TailModelDensity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tail = PowerLawTail::new(4.0, 0.02, 0.1)?;
    let model = TailModelDensity::flat_body(tail);
    let problem = ProblemSpec {
        clients: 8,
        batch: 4,
        dim: 10_000,
        sigma2: 1.0,
        nu: 1.0,
        eta: 0.05,
        rounds: 5000,
        f_gap: 10.0,
    };
    let opts = SolverOptions::default();
    println!("E_DSGD = {:.4e}\n", problem.e_dsgd());
    println!(
        "{:>4} {:>11} {:>11} {:>11} {:>11}",
        "s", "scheme", "model E_TQ", "closed form", "total"
    );

    for bits in 2..=8u32 {
        let s = (1usize << bits) - 1;
        for scheme in [Scheme::Uniform, Scheme::NonUniform, Scheme::BiScaled] {
            let Ok(b) = convergence_bound(&problem, scheme, &tail, s, MassModel::Density(&model), &opts) else {
                continue;
            };
            println!(
                "{s:>4} {:>11} {:>11.4e} {:>11.4e} {:>11.4e}",
                format!("{scheme:?}"),
                b.model.e_tq,
                b.quant_term,
                b.breakdown.total_bound
            );
            if let Some(v) = b.uniform_variant {
                println!(
                    "{:>16} Q_U(alpha') = {:.4}, coefficient gap {:.2e} (limit {:.2e})",
                    "", v.q_u_prime, v.epsilon, v.epsilon_limit
                );
            }
        }
    }
    Ok(())
}
