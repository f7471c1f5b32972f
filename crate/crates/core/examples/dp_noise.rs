//! Draws output-perturbation noise inside the protocol and checks its
//! magnitude against the Gamma(d, c) law.

use veiltrain::dp::{pi_noise_batch, DpParams};
use veiltrain::mpc::sim::{reveal, run_pair};
use veiltrain::{RingConfig, Result};

fn main() -> Result<()> {
    let c = RingConfig::default();
    let dp = DpParams::new(1.0, 1.0, 1000, 10)?;
    let runs = 500;
    let [a, b] = run_pair(c, 5, |p| {
        Ok(pi_noise_batch(p, runs, &dp)?.into_iter().map(|v| v.eta).collect::<Vec<_>>())
    })?;
    let norms: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| c.decode_vec(&reveal(&c, x, y)).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mean = norms.iter().sum::<f64>() / runs as f64;
    let var = norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let s = dp.scale();
    println!("c = {s}");
    println!("mean |eta| {mean:.5} (expected {:.5})", 10.0 * s);
    println!("var  |eta| {var:.3e} (expected {:.3e})", 10.0 * s * s);
    Ok(())
}
