//! Trains on shared data and compares the opened weights with the clear
//! mirror (bit-exact) and the floating-point trainer.

use veiltrain::clear::{mirror_pipeline, train_lr_clear, TrainMode};
use veiltrain::data::{evaluate, normalize_rows, synth_data};
use veiltrain::ml::{pi_train_pipeline, SecretDataset, TrainingConfig};
use veiltrain::mpc::sim::{reveal, run_pair, share_for};
use veiltrain::{RingConfig, Result};

fn main() -> Result<()> {
    let c = RingConfig::default();
    let ds = synth_data(200, 20, 3, 1.0);
    let cfg = TrainingConfig::default();
    let (x0, x1) = share_for(&c, &c.encode_vec(&ds.x)?, 1);
    let (t0, t1) = share_for(&c, &c.encode_vec(&ds.t)?, 2);
    let started = std::time::Instant::now();
    let [(w0, bytes), (w1, _)] = run_pair(c, 3, |p| {
        let (x, t) = if p.id().index() == 0 { (&x0, &t0) } else { (&x1, &t1) };
        let sd = SecretDataset::new(x.clone(), t.clone(), ds.n, ds.m)?;
        let st = pi_train_pipeline(p, &sd, &cfg, 42, false)?;
        Ok((st.w, p.transcript().total().bytes()))
    })?;
    let shared = reveal(&c, &w0, &w1);
    println!("trained in {:.1?}, {} MB exchanged", started.elapsed(), bytes / 1_000_000);

    let mirror = mirror_pipeline(&c, &ds.x, &ds.t, ds.n, ds.m, &cfg, 42, false)?;
    println!("bit-exact with the mirror: {}", shared == mirror);
    let float = train_lr_clear(&normalize_rows(&ds.x, ds.m), &ds.t, ds.n, ds.m, &cfg, 42, TrainMode::FloatExact)?;
    let w = c.decode_vec(&shared);
    let gap = w.iter().zip(&float.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max gap to the float trainer: {gap:.2e}");
    println!("training accuracy {:.3}", evaluate(&w, &ds)?);
    Ok(())
}
