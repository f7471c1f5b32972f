//! Two owners write share files, the parties and the dealer run over
//! loopback TCP, and the result is opened from the weight files.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use veiltrain::data::synth_data;
use veiltrain::mpc::PartyId;
use veiltrain::runtime::files::{share_path, weights_path};
use veiltrain::runtime::{ingest_shares, open_weights, run_local, BlockPlacement, SessionConfig, WeightShares};
use veiltrain::ml::TrainingConfig;
use veiltrain::Result;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("veiltrain-handoff-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let ds = synth_data(100, 8, 1, 1.0);
    let cfg = SessionConfig {
        training: TrainingConfig {
            epochs: 25,
            ..TrainingConfig::default()
        },
        epsilon: Some(2.0),
        noise_runs: 2,
        shares: vec![dir.join("alice"), dir.join("bob")],
        out_weights: Some(dir.join("model")),
        party0_addr: "127.0.0.1:0".into(),
        dealer_addr: "127.0.0.1:0".into(),
        ..SessionConfig::default()
    };
    for (i, prefix) in cfg.shares.iter().enumerate() {
        let rows: Vec<usize> = (i * 50..(i + 1) * 50).collect();
        let part = ds.select_rows(&rows);
        let place = BlockPlacement {
            row_offset: i * 50,
            ..BlockPlacement::whole(&ds)
        };
        let mut rng = ChaCha12Rng::from_os_rng();
        for b in ingest_shares(&cfg.ring, cfg.session, &part.x, Some(&part.t), 50, 8, place, &mut rng)? {
            b.write(share_path(prefix, b.party))?;
        }
    }
    let [(_, t0), _] = run_local(&cfg)?;
    println!("session done: {} rounds, {} bytes at party 0", t0.total().rounds, t0.total().bytes());
    for name in ["model", "model.noisy"] {
        let p = dir.join(name);
        let a = WeightShares::read(weights_path(&p, PartyId::P0))?;
        let b = WeightShares::read(weights_path(&p, PartyId::P1))?;
        for w in open_weights(&a, &b)? {
            let w: Vec<String> = w.iter().map(|v| format!("{v:+.3}")).collect();
            println!("{name:<12} {}", w.join(" "));
        }
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
