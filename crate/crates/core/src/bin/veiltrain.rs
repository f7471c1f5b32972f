use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use veiltrain::bench::kernel_bench;
use veiltrain::clear::baseline_local_models;
use veiltrain::data::{evaluate, load_csv, partition, PartitionMode, PartitionPlan};
use veiltrain::experiment::{run_experiment, ExperimentConfig};
use veiltrain::ml::TrainingConfig;
use veiltrain::mpc::PartyId;
use veiltrain::runtime::config::parse_epsilon;
use veiltrain::runtime::files::{share_path, weights_path, write_model_csv};
use veiltrain::runtime::{ingest_shares, open_weights, run_local, run_role, BlockPlacement, RoleOutcome};
use veiltrain::runtime::{Role, SessionConfig, WeightShares};
use veiltrain::{Error, Result};

#[derive(Parser)]
#[command(name = "veiltrain", version, about = "Secret-shared logistic regression with differentially private output")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one process of a session: a computing party or the dealer.
    Party {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        role: Role,
    },
    /// Split an owner's CSV into share files for both computing parties.
    Ingest {
        #[arg(long)]
        owner_csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Session config; only the ring and session id are read.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        row_offset: usize,
        #[arg(long, default_value_t = 0)]
        col_offset: usize,
        /// Rows of the global matrix; defaults to this owner's rows.
        #[arg(long)]
        total_rows: Option<usize>,
        #[arg(long)]
        total_cols: Option<usize>,
        /// Share features only; another owner holds the labels.
        #[arg(long)]
        no_labels: bool,
        /// Seed for the sharing randomness; fresh entropy when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on share files with all three roles in this process.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Perturb stored weight shares (`in_weights`) with all three roles in
    /// this process.
    Perturb {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reconstruct weights from both parties' weight files into a CSV.
    Open {
        /// Prefix the weight files were written under.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train locally at each owner, perturb and average.
    Baseline {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 2)]
        owners: usize,
        /// Privacy budget, or `inf` for no noise.
        #[arg(long, default_value = "1")]
        epsilon: String,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report accuracy on this CSV.
        #[arg(long)]
        test_csv: Option<PathBuf>,
    },
    /// Measure kernel accuracy and shared cost.
    KernelBench {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 256)]
        mpc_elements: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Cross-validated comparison over owner partitions.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Party { config, role } => {
            let cfg = SessionConfig::load(config)?;
            match run_role(&cfg, role, None)? {
                RoleOutcome::Dealer => println!("dealer: session {} closed", cfg.session),
                RoleOutcome::Party(out, rep) => println!(
                    "party {}: {} weights, {} noisy runs, {} rounds, {} bytes",
                    rep.party.index(),
                    out.weights.len(),
                    out.noisy.len(),
                    rep.total.rounds,
                    rep.total.bytes()
                ),
            }
        }
        Cmd::Ingest {
            owner_csv,
            out,
            config,
            row_offset,
            col_offset,
            total_rows,
            total_cols,
            no_labels,
            seed,
        } => {
            let cfg = match config {
                Some(p) => SessionConfig::load(p)?,
                None => SessionConfig::default(),
            };
            let ds = load_csv(&owner_csv)?;
            let place = BlockPlacement {
                total_rows: total_rows.unwrap_or(row_offset + ds.n),
                total_cols: total_cols.unwrap_or(col_offset + ds.m),
                row_offset,
                col_offset,
            };
            let mut rng = match seed {
                Some(s) => ChaCha12Rng::seed_from_u64(s),
                None => ChaCha12Rng::from_os_rng(),
            };
            let labels = (!no_labels).then_some(ds.t.as_slice());
            let blocks = ingest_shares(&cfg.ring, cfg.session, &ds.x, labels, ds.n, ds.m, place, &mut rng)?;
            for b in &blocks {
                let p = share_path(&out, b.party);
                b.write(&p)?;
                println!("wrote {}", p.display());
            }
            println!("{} rows x {} columns at ({row_offset}, {col_offset})", ds.n, ds.m);
        }
        Cmd::Train { config } => {
            let mut cfg = SessionConfig::load(config)?;
            cfg.epsilon = None;
            cfg.in_weights = None;
            print_local(&cfg)?;
        }
        Cmd::Perturb { config } => {
            let cfg = SessionConfig::load(config)?;
            if cfg.in_weights.is_none() || cfg.epsilon.is_none() {
                return Err(Error::InvalidConfig("perturb needs `in_weights` and `epsilon`".into()));
            }
            print_local(&cfg)?;
        }
        Cmd::Open { weights, out } => {
            let a = WeightShares::read(weights_path(&weights, PartyId::P0))?;
            let b = WeightShares::read(weights_path(&weights, PartyId::P1))?;
            let runs = open_weights(&a, &b)?;
            write_model_csv(&out, &runs)?;
            println!("{} run(s) of {} coefficients -> {}", runs.len(), a.d, out.display());
        }
        Cmd::Baseline {
            csv,
            owners,
            epsilon,
            epochs,
            seed,
            out,
            test_csv,
        } => {
            let ds = load_csv(&csv)?;
            let plan = PartitionPlan::even(PartitionMode::Horizontal, owners, ds.n)?;
            let parts = partition(&ds, &plan)?;
            let cfg = TrainingConfig {
                epochs,
                ..TrainingConfig::default()
            };
            let local = baseline_local_models(&parts, &cfg, seed)?;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let (model, runs) = local.draw(parse_epsilon(&epsilon)?, &mut rng)?;
            for (i, r) in runs.iter().enumerate() {
                println!("owner {i}: {} rows, noise scale {:.6}", r.n_owner, r.scale);
            }
            if let Some(t) = test_csv {
                println!("accuracy {:.4}", evaluate(&model.weights, &load_csv(t)?)?);
            }
            if let Some(o) = out {
                write_model_csv(&o, &[model.weights])?;
            }
        }
        Cmd::KernelBench {
            samples,
            mpc_elements,
            seed,
        } => {
            let rows = kernel_bench(Default::default(), samples, mpc_elements, seed)?;
            println!(
                "{:<8} {:>12} {:>12} {:>6} {:>7} {:>12} {:>9} {:>9}",
                "kernel", "max_err", "tolerance", "ok", "rounds", "bytes/elem", "triples", "seconds"
            );
            for r in &rows {
                println!(
                    "{:<8} {:>12.3e} {:>12.3e} {:>6} {:>7} {:>12.1} {:>9} {:>9.3}",
                    r.kernel,
                    r.max_abs_error,
                    r.tolerance,
                    r.passes(),
                    r.mpc.rounds,
                    r.mpc.bytes() as f64 / r.mpc_elements.max(1) as f64,
                    r.mpc.triples,
                    r.mpc.seconds
                );
            }
        }
        Cmd::Experiment { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let rep = run_experiment(&cfg)?;
            print!("{}", rep.to_csv(true));
        }
    }
    Ok(())
}

fn print_local(cfg: &SessionConfig) -> Result<()> {
    let [(o0, t0), _] = run_local(cfg)?;
    let total = t0.total();
    println!(
        "{} weights, {} noisy runs, {} rounds, {} bytes at party 0",
        o0.weights.len(),
        o0.noisy.len(),
        total.rounds,
        total.bytes()
    );
    if let Some(p) = &cfg.out_weights {
        println!("weights under {}", p.display());
    }
    Ok(())
}
