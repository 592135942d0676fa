//! Communication budget against final loss for every scheme.
//!
//! Prints the trade-off table and writes the per-round CSV to
//! `compare.csv` when a path is given.

use heavytail::sim::{compare, SimConfig, SimScheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut configs = vec![];
    for scheme in SimScheme::ALL {
        let widths: &[u8] = if scheme == SimScheme::Dsgd { &[0] } else { &[2, 3, 4] };
        for &bits in widths {
            let mut cfg = SimConfig::heavy_tailed_quadratic(scheme, bits, 0);
            cfg.problem.rounds = 400;
            configs.push(cfg);
        }
    }
    let table = compare(&configs)?;

    println!("{:>7} {:>4} {:>12} {:>11}", "scheme", "bits", "bytes", "final loss");
    for row in table.tradeoff() {
        println!(
            "{:>7} {:>4} {:>12} {:>11.4}",
            row.scheme.name(),
            row.bits,
            row.total_bytes,
            row.final_loss
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        table.write_csv(std::fs::File::create(&path)?)?;
        println!("per-round table written to {path}");
    }
    Ok(())
}
