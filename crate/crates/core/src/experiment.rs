//! Cross-validated experiments comparing the shared pipeline with the
//! train-locally-then-average baseline over owner partitions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::clear::{baseline_local_models, mirror_pipeline, train_lr_clear, TrainMode};
use crate::data::{
    evaluate_with, load_csv, normalize_rows, partition, stratified_folds, synth_data, Dataset, OwnerData,
    PartitionMode, PartitionPlan,
};
use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::ml::{SecretDataset, TrainingConfig};
use crate::mpc::sim::{reveal, try_run_pair_with, SessionLinks};
use crate::mpc::{PartyId, ProtoStats};
use crate::runtime::config::{parse_epsilon, KvFile};
use crate::runtime::files::{assemble, ingest_shares, share_path, BlockPlacement, ShareBlock};
use crate::runtime::report::write_stats;
use crate::runtime::session::{run_job, run_local_with, Job};
use crate::runtime::{RunReport, SessionConfig};

/// Top-level protocol scopes reported per run.
pub const MPC_STAGES: [&str; 3] = ["norm", "lr", "dp"];

/// `mode:k`, for example `horizontal:4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanSpec {
    pub mode: PartitionMode,
    pub owners: usize,
}

impl PlanSpec {
    pub fn label(&self) -> String {
        format!("{}:{}", self.mode.name(), self.owners)
    }
}

impl FromStr for PlanSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<PlanSpec> {
        let (mode, k) = s
            .split_once(':')
            .ok_or_else(|| Error::PlanInvalid(format!("expected `mode:owners`, got `{s}`")))?;
        let owners = k
            .trim()
            .parse()
            .map_err(|_| Error::PlanInvalid(format!("bad owner count in `{s}`")))?;
        Ok(PlanSpec {
            mode: mode.trim().parse()?,
            owners,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth {
        n: usize,
        m: usize,
        seed: u64,
        separability: f64,
    },
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    /// Threads over loopback TCP with the full handshake.
    Tcp,
    /// Threads over in-process channels.
    Memory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub folds: usize,
    pub fold_seed: u64,
    pub plans: Vec<PlanSpec>,
    pub ring: RingConfig,
    pub training: TrainingConfig,
    pub skip_norm: bool,
    pub epsilon: Option<f64>,
    pub noise_runs: usize,
    /// Initial weights seed; fold `f` uses `model_seed + f` for every plan.
    pub model_seed: u64,
    pub dealer_seed: u64,
    /// Seed for the owners' sharing randomness.
    pub share_seed: u64,
    /// Seed for the baseline's local noise.
    pub noise_seed: u64,
    pub transport: Transport,
    /// Also train float and mirror models on the pooled training rows.
    pub central: bool,
    /// When set, owners hand their shares over as files in this directory.
    pub workdir: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synth {
                n: 2000,
                m: 50,
                seed: 2,
                separability: 1.0,
            },
            folds: 5,
            fold_seed: 1,
            plans: ["horizontal:1", "horizontal:2", "horizontal:4", "horizontal:8", "vertical:2", "vertical:4"]
                .iter()
                .map(|s| s.parse().unwrap())
                .collect(),
            ring: RingConfig::default(),
            training: TrainingConfig::default(),
            skip_norm: false,
            epsilon: Some(1.0),
            noise_runs: 100,
            model_seed: 7,
            dealer_seed: 11,
            share_seed: 13,
            noise_seed: 17,
            transport: Transport::Tcp,
            central: true,
            workdir: None,
            report: None,
            table: None,
        }
    }
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "data",
    "synth_n",
    "synth_m",
    "synth_seed",
    "separability",
    "folds",
    "fold_seed",
    "plans",
    "lambda",
    "frac_bits",
    "epochs",
    "alpha",
    "lambda_reg",
    "momentum",
    "bias",
    "skip_norm",
    "epsilon",
    "noise_runs",
    "seed",
    "dealer_seed",
    "share_seed",
    "noise_seed",
    "transport",
    "central",
    "workdir",
    "report",
    "table",
];

impl ExperimentConfig {
    pub fn from_kv(kv: &KvFile) -> Result<ExperimentConfig> {
        kv.reject_unknown(EXPERIMENT_KEYS)?;
        let d = ExperimentConfig::default();
        let DataSource::Synth {
            n: dn,
            m: dm,
            seed: ds,
            separability: dsep,
        } = d.data
        else {
            unreachable!()
        };
        let data = match kv.raw("data") {
            None | Some("synth") => DataSource::Synth {
                n: kv.get_or("synth_n", dn)?,
                m: kv.get_or("synth_m", dm)?,
                seed: kv.get_or("synth_seed", ds)?,
                separability: kv.get_or("separability", dsep)?,
            },
            Some(path) => DataSource::Csv(PathBuf::from(path)),
        };
        let plans = match kv.raw("plans") {
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::parse)
                .collect::<Result<Vec<_>>>()?,
            None => d.plans.clone(),
        };
        let training = TrainingConfig {
            alpha: kv.get_or("alpha", d.training.alpha)?,
            lambda_reg: kv.get_or("lambda_reg", d.training.lambda_reg)?,
            momentum: kv.get_or("momentum", d.training.momentum)?,
            epochs: kv.get_or("epochs", d.training.epochs)?,
            bias: kv.get_or("bias", d.training.bias)?,
        };
        let transport = match kv.raw("transport") {
            None | Some("tcp") => Transport::Tcp,
            Some("memory") => Transport::Memory,
            Some(o) => return Err(Error::InvalidConfig(format!("unknown transport `{o}`"))),
        };
        let cfg = ExperimentConfig {
            data,
            folds: kv.get_or("folds", d.folds)?,
            fold_seed: kv.get_or("fold_seed", d.fold_seed)?,
            plans,
            ring: RingConfig::new(
                kv.get_or("lambda", d.ring.lambda)?,
                kv.get_or("frac_bits", d.ring.frac_bits)?,
            )?,
            training,
            skip_norm: kv.get_or("skip_norm", d.skip_norm)?,
            epsilon: match kv.raw("epsilon") {
                Some(v) => parse_epsilon(v)?,
                None => d.epsilon,
            },
            noise_runs: kv.get_or("noise_runs", d.noise_runs)?,
            model_seed: kv.get_or("seed", d.model_seed)?,
            dealer_seed: kv.get_or("dealer_seed", d.dealer_seed)?,
            share_seed: kv.get_or("share_seed", d.share_seed)?,
            noise_seed: kv.get_or("noise_seed", d.noise_seed)?,
            transport,
            central: kv.get_or("central", d.central)?,
            workdir: kv.get("workdir")?,
            report: kv.get("report")?,
            table: kv.get("table")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_kv(&KvFile::parse(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        ExperimentConfig::from_kv(&KvFile::load(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.plans.is_empty() {
            return Err(Error::PlanInvalid("no plans configured".into()));
        }
        if self.epsilon.is_some() && self.noise_runs == 0 {
            return Err(Error::InvalidConfig("noise_runs must be positive".into()));
        }
        Ok(())
    }

    /// Settings that determine the results, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let t = &self.training;
        let mut v = vec![];
        match &self.data {
            DataSource::Synth {
                n,
                m,
                seed,
                separability,
            } => {
                v.push(("data".into(), "synth".into()));
                v.push(("synth_n".into(), n.to_string()));
                v.push(("synth_m".into(), m.to_string()));
                v.push(("synth_seed".into(), seed.to_string()));
                v.push(("separability".into(), format!("{separability:?}")));
            }
            DataSource::Csv(p) => v.push(("data".into(), p.display().to_string())),
        }
        let plans: Vec<String> = self.plans.iter().map(PlanSpec::label).collect();
        v.extend([
            ("folds".into(), self.folds.to_string()),
            ("fold_seed".into(), self.fold_seed.to_string()),
            ("plans".into(), plans.join(",")),
            ("lambda".into(), self.ring.lambda.to_string()),
            ("frac_bits".into(), self.ring.frac_bits.to_string()),
            ("epochs".into(), t.epochs.to_string()),
            ("alpha".into(), format!("{:?}", t.alpha)),
            ("lambda_reg".into(), format!("{:?}", t.lambda_reg)),
            ("momentum".into(), format!("{:?}", t.momentum)),
            ("bias".into(), t.bias.to_string()),
            ("skip_norm".into(), self.skip_norm.to_string()),
            (
                "epsilon".into(),
                self.epsilon.map(|e| format!("{e:?}")).unwrap_or_else(|| "inf".into()),
            ),
            ("noise_runs".into(), self.noise_runs.to_string()),
            ("seed".into(), self.model_seed.to_string()),
            ("dealer_seed".into(), self.dealer_seed.to_string()),
            ("share_seed".into(), self.share_seed.to_string()),
            ("noise_seed".into(), self.noise_seed.to_string()),
        ]);
        v
    }

    pub fn load_data(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Synth {
                n,
                m,
                seed,
                separability,
            } => Ok(synth_data(*n, *m, *seed, *separability)),
            DataSource::Csv(p) => load_csv(p),
        }
    }
}

/// Accuracies of one method: `[fold][draw]`, plus summed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: String,
    pub accuracy: Vec<Vec<f64>>,
    pub seconds: f64,
    /// Bytes exchanged between the computing parties, as seen by party 0.
    pub bytes: u64,
}

impl MethodResult {
    fn new(method: &str) -> Self {
        MethodResult {
            method: method.into(),
            accuracy: Vec::new(),
            seconds: 0.0,
            bytes: 0,
        }
    }

    /// Mean over folds per draw, then mean and population standard
    /// deviation over draws.
    pub fn summary(&self) -> (f64, f64) {
        let draws = self.accuracy.iter().map(Vec::len).min().unwrap_or(0);
        if draws == 0 {
            return (f64::NAN, f64::NAN);
        }
        let per_draw: Vec<f64> = (0..draws)
            .map(|r| self.accuracy.iter().map(|f| f[r]).sum::<f64>() / self.accuracy.len() as f64)
            .collect();
        let mean = per_draw.iter().sum::<f64>() / draws as f64;
        let var = per_draw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / draws as f64;
        (mean, var.sqrt())
    }
}

/// Shared-pipeline outcome of one fold under one plan.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRun {
    /// Opened ring values of the trained weights before noise.
    pub weights: Vec<u64>,
    pub stages: BTreeMap<String, ProtoStats>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub plan: PlanSpec,
    pub folds: Vec<FoldRun>,
    pub methods: Vec<MethodResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub owners: String,
    pub mode: String,
    pub method: String,
    pub mean_acc: Option<f64>,
    pub std_acc: Option<f64>,
    pub runtime_s: Option<f64>,
    pub bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: Vec<(String, String)>,
    pub data_hash: String,
    pub rows: usize,
    pub cols: usize,
    pub base_rate: f64,
    pub central: Vec<MethodResult>,
    pub plans: Vec<PlanResult>,
}

fn hash_words(w: &[u64]) -> String {
    let mut h = Sha256::new();
    for v in w {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn fmt_acc(v: f64) -> String {
    format!("{v:.6}")
}

impl ExperimentReport {
    pub fn plan(&self, label: &str) -> Option<&PlanResult> {
        self.plans.iter().find(|p| p.plan.label() == label)
    }

    pub fn method(&self, plan: &str, method: &str) -> Option<&MethodResult> {
        self.plan(plan)?.methods.iter().find(|m| m.method == method)
    }

    /// One row per plan and method. Vertical plans get a baseline row
    /// with every value missing.
    pub fn table(&self) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for c in &self.central {
            let (mean, std) = c.summary();
            rows.push(TableRow {
                owners: "1".into(),
                mode: "central".into(),
                method: c.method.clone(),
                mean_acc: Some(mean),
                std_acc: Some(std),
                runtime_s: Some(c.seconds),
                bytes: Some(0),
            });
        }
        for p in &self.plans {
            for m in &p.methods {
                let (mean, std) = m.summary();
                rows.push(TableRow {
                    owners: p.plan.owners.to_string(),
                    mode: p.plan.mode.name().into(),
                    method: m.method.clone(),
                    mean_acc: Some(mean),
                    std_acc: Some(std),
                    runtime_s: Some(m.seconds),
                    bytes: Some(m.bytes),
                });
            }
            if p.plan.mode == PartitionMode::Vertical {
                rows.push(TableRow {
                    owners: p.plan.owners.to_string(),
                    mode: p.plan.mode.name().into(),
                    method: "baseline".into(),
                    mean_acc: None,
                    std_acc: None,
                    runtime_s: None,
                    bytes: None,
                });
            }
        }
        rows
    }

    /// CSV with columns owners, mode, method, mean_acc, std_acc,
    /// runtime_s, bytes. Missing cells are `-`; runtimes are `-` too
    /// unless `with_timings`.
    pub fn to_csv(&self, with_timings: bool) -> String {
        let dash = || "-".to_string();
        let mut out = String::from("owners,mode,method,mean_acc,std_acc,runtime_s,bytes\n");
        for r in self.table() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.owners,
                r.mode,
                r.method,
                r.mean_acc.map(fmt_acc).unwrap_or_else(dash),
                r.std_acc.map(fmt_acc).unwrap_or_else(dash),
                r.runtime_s
                    .filter(|_| with_timings)
                    .map(|s| format!("{s:.3}"))
                    .unwrap_or_else(dash),
                r.bytes.map(|b| b.to_string()).unwrap_or_else(dash),
            );
        }
        out
    }

    pub fn to_kv(&self, with_timings: bool) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k} = {v}");
        }
        let _ = writeln!(out, "data.hash = {}", self.data_hash);
        let _ = writeln!(out, "data.rows = {}", self.rows);
        let _ = writeln!(out, "data.cols = {}", self.cols);
        let _ = writeln!(out, "data.base_rate = {}", fmt_acc(self.base_rate));
        for c in &self.central {
            write_method(&mut out, &format!("central.{}", c.method), c, with_timings);
        }
        for p in &self.plans {
            let key = format!("plan.{}", p.plan.label());
            for (f, run) in p.folds.iter().enumerate() {
                let fk = format!("{key}.fold.{f}");
                let _ = writeln!(out, "{fk}.weights_hash = {}", hash_words(&run.weights));
                for (stage, s) in &run.stages {
                    write_stats(&mut out, &format!("{fk}.stage.{stage}"), s, with_timings);
                }
                if with_timings {
                    let _ = writeln!(out, "{fk}.seconds = {:.6}", run.seconds);
                }
            }
            for m in &p.methods {
                write_method(&mut out, &format!("{key}.{}", m.method), m, with_timings);
            }
        }
        out
    }

    /// Writes the key-value report and the CSV table, with timings.
    pub fn write(&self, report: Option<&Path>, table: Option<&Path>) -> Result<()> {
        if let Some(p) = report {
            std::fs::write(p, self.to_kv(true))?;
        }
        if let Some(p) = table {
            std::fs::write(p, self.to_csv(true))?;
        }
        Ok(())
    }
}

fn write_method(out: &mut String, key: &str, m: &MethodResult, with_timings: bool) {
    for (f, accs) in m.accuracy.iter().enumerate() {
        let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
        let _ = writeln!(out, "{key}.fold.{f}.mean_acc = {}", fmt_acc(mean));
    }
    let (mean, std) = m.summary();
    let _ = writeln!(out, "{key}.mean_acc = {}", fmt_acc(mean));
    let _ = writeln!(out, "{key}.std_acc = {}", fmt_acc(std));
    let _ = writeln!(out, "{key}.bytes = {}", m.bytes);
    if with_timings {
        let _ = writeln!(out, "{key}.runtime_s = {:.6}", m.seconds);
    }
}

/// What the shared pipeline produced for one fold and plan.
struct MpcOutcome {
    weights: Vec<u64>,
    noisy: Vec<Vec<u64>>,
    stages: BTreeMap<String, ProtoStats>,
    total: ProtoStats,
}

/// Each owner encodes and shares its block; the parties place the blocks.
fn ingest(
    cfg: &ExperimentConfig,
    owners: &[OwnerData],
    n: usize,
    m: usize,
    session: u32,
    tag: &str,
) -> Result<[SecretDataset; 2]> {
    let mut blocks: [Vec<ShareBlock>; 2] = [Vec::new(), Vec::new()];
    for o in owners {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.share_seed ^ ((session as u64) << 32) ^ o.owner as u64);
        let place = BlockPlacement {
            total_rows: n,
            total_cols: m,
            row_offset: o.rows.start,
            col_offset: o.columns.start,
        };
        let pair = ingest_shares(
            &cfg.ring,
            session,
            &o.x,
            o.t.as_deref(),
            o.rows.len(),
            o.columns.len(),
            place,
            &mut rng,
        )?;
        for b in pair {
            let b = match &cfg.workdir {
                Some(dir) => {
                    let path = share_path(&dir.join(format!("{tag}.owner{}", o.owner)), b.party);
                    b.write(&path)?;
                    ShareBlock::read(&path)?
                }
                None => b,
            };
            blocks[b.party.index()].push(b);
        }
    }
    Ok([
        assemble(PartyId::P0, &cfg.ring, session, &blocks[0])?,
        assemble(PartyId::P1, &cfg.ring, session, &blocks[1])?,
    ])
}

fn run_mpc(cfg: &ExperimentConfig, scfg: &SessionConfig, jobs: [Job; 2]) -> Result<MpcOutcome> {
    let [(o0, t0), (o1, _)] = match cfg.transport {
        Transport::Tcp => run_local_with(scfg, &jobs)?,
        Transport::Memory => {
            let [a, b] = try_run_pair_with(scfg.ring, scfg.dealer_seed, SessionLinks::memory(), |p| {
                let out = run_job(p, scfg, &jobs[p.id().index()])?;
                Ok((out, p.transcript().clone()))
            });
            [a?, b?]
        }
    };
    let rc = &scfg.ring;
    let report = RunReport::from_transcript(PartyId::P0, &t0);
    Ok(MpcOutcome {
        weights: reveal(rc, &o0.weights, &o1.weights),
        noisy: o0.noisy.iter().zip(&o1.noisy).map(|(a, b)| reveal(rc, a, b)).collect(),
        stages: MPC_STAGES
            .iter()
            .map(|s| (s.to_string(), report.stage(s)))
            .filter(|(s, st)| s != "dp" || st.rounds > 0)
            .collect(),
        total: report.total,
    })
}

fn accuracy_of(rc: &RingConfig, w: &[u64], test: &Dataset, normalize: bool) -> Result<f64> {
    evaluate_with(&rc.decode_vec(w), test, normalize)
}

/// Runs every fold under every plan. Folds run one after another; each
/// plan of a fold reuses the fold's model and dealer seeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ds = cfg.load_data().map_err(|e| e.in_stage("load"))?;
    let folds = stratified_folds(&ds.t, cfg.folds, cfg.fold_seed).map_err(|e| e.in_stage("folds"))?;
    if let Some(dir) = &cfg.workdir {
        std::fs::create_dir_all(dir)?;
    }
    let normalize = !cfg.skip_norm;
    let mut central = vec![MethodResult::new("float"), MethodResult::new("mirror")];
    let mut plans: Vec<PlanResult> = cfg
        .plans
        .iter()
        .map(|&plan| {
            let mut methods = vec![MethodResult::new("mpc")];
            if cfg.epsilon.is_some() {
                methods.push(MethodResult::new("mpc_dp"));
            }
            if plan.mode == PartitionMode::Horizontal {
                methods.push(MethodResult::new("baseline"));
            }
            PlanResult {
                plan,
                folds: Vec::new(),
                methods,
            }
        })
        .collect();

    for (f, (train_idx, test_idx)) in folds.iter().enumerate() {
        let train = ds.select_rows(train_idx);
        let test = ds.select_rows(test_idx);
        let seed = cfg.model_seed.wrapping_add(f as u64);
        let fold_err = |stage: &str| format!("fold {f}: {stage}");

        if cfg.central {
            let start = Instant::now();
            let x = if normalize {
                normalize_rows(&train.x, train.m)
            } else {
                train.x.clone()
            };
            let fl = train_lr_clear(&x, &train.t, train.n, train.m, &cfg.training, seed, TrainMode::FloatExact)
                .map_err(|e| e.in_stage(fold_err("float")))?;
            central[0].accuracy.push(vec![evaluate_with(&fl.weights, &test, normalize)?]);
            central[0].seconds += start.elapsed().as_secs_f64();
            let start = Instant::now();
            let mw = mirror_pipeline(
                &cfg.ring,
                &train.x,
                &train.t,
                train.n,
                train.m,
                &cfg.training,
                seed,
                cfg.skip_norm,
            )
            .map_err(|e| e.in_stage(fold_err("mirror")))?;
            central[1].accuracy.push(vec![accuracy_of(&cfg.ring, &mw, &test, normalize)?]);
            central[1].seconds += start.elapsed().as_secs_f64();
        }

        for pr in plans.iter_mut() {
            let plan = pr.plan;
            let label = plan.label();
            let stage = |s: &str| format!("fold {f}, plan {label}: {s}");
            let total = match plan.mode {
                PartitionMode::Horizontal => train.n,
                PartitionMode::Vertical => train.m,
            };
            let owners = PartitionPlan::even(plan.mode, plan.owners, total)
                .and_then(|p| partition(&train, &p))
                .map_err(|e| e.in_stage(stage("partition")))?;

            let start = Instant::now();
            let session = f as u32 + 1;
            let tag = format!("fold{f}.{}{}", plan.mode.name(), plan.owners);
            let [d0, d1] = ingest(cfg, &owners, train.n, train.m, session, &tag)
                .map_err(|e| e.in_stage(stage("ingest")))?;
            let scfg = SessionConfig {
                ring: cfg.ring,
                session,
                seed,
                dealer_seed: cfg.dealer_seed.wrapping_add(f as u64),
                training: cfg.training,
                skip_norm: cfg.skip_norm,
                epsilon: cfg.epsilon,
                noise_runs: cfg.noise_runs,
                party0_addr: "127.0.0.1:0".into(),
                dealer_addr: "127.0.0.1:0".into(),
                partition: label.clone(),
                ..SessionConfig::default()
            };
            let out = run_mpc(cfg, &scfg, [Job::Train(d0), Job::Train(d1)])
                .map_err(|e| e.in_stage(stage("mpc")))?;
            let seconds = start.elapsed().as_secs_f64();

            let eval = |w: &[u64]| accuracy_of(&cfg.ring, w, &test, normalize);
            let pre = eval(&out.weights).map_err(|e| e.in_stage(stage("evaluate")))?;
            let train_cost = {
                let mut s = ProtoStats::default();
                for k in ["norm", "lr"] {
                    s.add(&out.stages.get(k).copied().unwrap_or_default());
                }
                s
            };
            for m in pr.methods.iter_mut() {
                match m.method.as_str() {
                    "mpc" => {
                        m.accuracy.push(vec![pre]);
                        m.seconds += train_cost.seconds;
                        m.bytes += train_cost.bytes();
                    }
                    "mpc_dp" => {
                        let accs = out
                            .noisy
                            .iter()
                            .map(|w| eval(w))
                            .collect::<Result<Vec<_>>>()
                            .map_err(|e| e.in_stage(stage("evaluate")))?;
                        m.accuracy.push(accs);
                        m.seconds += seconds;
                        m.bytes += out.total.bytes();
                    }
                    "baseline" => {
                        let start = Instant::now();
                        let local = baseline_local_models(&owners, &cfg.training, seed)
                            .map_err(|e| e.in_stage(stage("baseline")))?;
                        let mut rng = ChaCha12Rng::seed_from_u64(
                            cfg.noise_seed ^ ((f as u64) << 32) ^ plan.owners as u64,
                        );
                        let draws = if cfg.epsilon.is_some() { cfg.noise_runs } else { 1 };
                        let mut accs = Vec::with_capacity(draws);
                        for _ in 0..draws {
                            let (avg, _) = local
                                .draw(cfg.epsilon, &mut rng)
                                .map_err(|e| e.in_stage(stage("baseline")))?;
                            accs.push(evaluate_with(&avg.weights, &test, normalize)?);
                        }
                        m.accuracy.push(accs);
                        m.seconds += start.elapsed().as_secs_f64();
                    }
                    _ => {}
                }
            }
            pr.folds.push(FoldRun {
                weights: out.weights,
                stages: out.stages,
                seconds,
            });
        }
    }

    let report = ExperimentReport {
        config: cfg.echo(),
        data_hash: ds.hash(),
        rows: ds.n,
        cols: ds.m,
        base_rate: ds.base_rate(),
        central: if cfg.central { central } else { Vec::new() },
        plans,
    };
    report.write(cfg.report.as_deref(), cfg.table.as_deref())?;
    Ok(report)
}
