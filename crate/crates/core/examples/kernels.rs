//! Accuracy of every kernel on random inputs, and what one shared call
//! costs.

use veiltrain::bench::kernel_bench;
use veiltrain::{RingConfig, Result};

fn main() -> Result<()> {
    let rows = kernel_bench(RingConfig::default(), 2_000, 64, 7)?;
    println!("kernel   max error   tolerance  rounds  triples/elem  oblivious");
    for r in rows {
        println!(
            "{:<8} {:>9.2e}   {:>9.2e}  {:>6}  {:>12.1}  {}",
            r.kernel,
            r.max_abs_error,
            r.tolerance,
            r.mpc.rounds,
            r.mpc.triples as f64 / r.mpc_elements as f64,
            r.oblivious
        );
    }
    Ok(())
}
