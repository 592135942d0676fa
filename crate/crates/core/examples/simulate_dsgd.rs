//! Distributed SGD with truncated quantization on the heavy-tailed quadratic.
//!
//! ```text
//! cargo run --release --example simulate_dsgd [tqsgd|tnqsgd|tbqsgd|qsgd|nqsgd|dsgd] [bits]
//! ```

use heavytail::sim::{run, SimConfig, SimScheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let scheme: SimScheme = args.next().as_deref().unwrap_or("tqsgd").parse()?;
    let bits: u8 = args.next().map(|b| b.parse()).transpose()?.unwrap_or(3);

    let mut cfg = SimConfig::heavy_tailed_quadratic(scheme, bits, 0);
    cfg.problem.rounds = 500;
    let log = run(&cfg)?;

    println!(
        "{scheme} b={bits}, {} clients, d={}",
        cfg.problem.clients, cfg.problem.dim
    );
    for r in log.records.iter().step_by(50) {
        print!(
            "round {:>4}  loss {:>10.4}  uplink {:>9} B",
            r.round, r.loss, r.cum_bytes
        );
        if let Some(g) = r.groups.first() {
            print!("  gamma {:.2} alpha {:.3}", g.gamma, g.alpha);
        }
        println!();
    }
    println!(
        "final loss {:.4} after {} rounds, {} bytes uplinked",
        log.summary.final_loss, log.summary.rounds, log.summary.total_bytes
    );
    Ok(())
}
