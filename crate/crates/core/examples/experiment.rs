//! A small cross-validated experiment over horizontal and vertical owner
//! splits.

use veiltrain::experiment::{run_experiment, ExperimentConfig};
use veiltrain::Result;

fn main() -> Result<()> {
    let cfg = ExperimentConfig::parse(
        "synth_n = 400
         synth_m = 12
         synth_seed = 3
         folds = 3
         epochs = 40
         plans = horizontal:1, horizontal:2, horizontal:4, vertical:2
         epsilon = 1
         noise_runs = 30
         transport = memory",
    )?;
    let report = run_experiment(&cfg)?;
    print!("{}", report.to_csv(true));
    Ok(())
}
