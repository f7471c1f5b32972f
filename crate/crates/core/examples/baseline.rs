//! The train-locally-then-average baseline: accuracy falls as the same
//! rows are split among more owners.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use veiltrain::clear::baseline_local_models;
use veiltrain::data::{evaluate, partition, synth_data, PartitionMode, PartitionPlan};
use veiltrain::ml::TrainingConfig;
use veiltrain::Result;

fn main() -> Result<()> {
    let ds = synth_data(2000, 50, 2, 1.0);
    let train = ds.select_rows(&(0..1600).collect::<Vec<_>>());
    let test = ds.select_rows(&(1600..2000).collect::<Vec<_>>());
    let cfg = TrainingConfig::default();
    for k in [1, 2, 4, 8, 16] {
        let owners = partition(&train, &PartitionPlan::even(PartitionMode::Horizontal, k, train.n)?)?;
        let local = baseline_local_models(&owners, &cfg, 1)?;
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let draws = 50;
        let mut acc = 0.0;
        for _ in 0..draws {
            let (m, _) = local.draw(Some(1.0), &mut rng)?;
            acc += evaluate(&m.weights, &test)? / draws as f64;
        }
        println!("{k:>2} owners: {acc:.4}");
    }
    Ok(())
}
