//! Row-wise L2 normalization of a shared matrix.

use veiltrain::ml::{pi_norm, provisioned};
use veiltrain::mpc::sim::{reveal, run_pair, share_for};
use veiltrain::{RingConfig, Result};

fn main() -> Result<()> {
    let c = RingConfig::default();
    let rows = [[3.0, 4.0, 0.0], [1.0, 1.0, 1.0], [-0.01, 0.02, 0.0], [0.0, 0.0, 0.0]];
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let (s0, s1) = share_for(&c, &c.encode_vec(&flat)?, 1);
    let [a, b] = run_pair(c, 2, |p| {
        let mine = if p.id().index() == 0 { &s0 } else { &s1 };
        provisioned(p, |q| pi_norm(q, mine, 3))
    })?;
    for (row, out) in rows.iter().zip(c.decode_vec(&reveal(&c, &a, &b)).chunks(3)) {
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("{row:?} -> [{:.5}, {:.5}, {:.5}] (norm {norm:.5})", out[0], out[1], out[2]);
    }
    Ok(())
}
