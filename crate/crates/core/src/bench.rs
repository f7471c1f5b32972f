//! Accuracy and cost of the math kernels on random in-domain inputs.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::fixed::RingConfig;
use crate::math::kernels::tolerance;
use crate::math::{pi_div, pi_ln, pi_sigmoid, pi_sin_cos, pi_sqrt, Arith, ClearArith};
use crate::ml::provisioned;
use crate::mpc::sim::{reveal, run_pair, share_for};
use crate::mpc::ProtoStats;

pub const BENCH_KERNELS: [&str; 6] = ["div", "sqrt", "ln", "sin", "cos", "sigmoid"];

#[derive(Debug, Clone, PartialEq)]
pub struct KernelBenchRow {
    pub kernel: &'static str,
    pub samples: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
    /// Elements in each of the two shared runs.
    pub mpc_elements: usize,
    /// Party 0's counters for one shared run.
    pub mpc: ProtoStats,
    /// Both shared runs on different inputs had identical counters.
    pub oblivious: bool,
    /// Shared outputs equal the clear mirror bit for bit.
    pub matches_mirror: bool,
}

impl KernelBenchRow {
    pub fn passes(&self) -> bool {
        self.max_abs_error <= self.tolerance && self.oblivious && self.matches_mirror
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Random inputs for `kernel`, encoded. Division takes a numerator and a
/// denominator; the quotient stays inside `(-1024, 1024)`.
pub fn sample_inputs(cfg: &RingConfig, kernel: &str, n: usize, seed: u64) -> Result<Vec<Vec<u64>>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = |f: &mut dyn FnMut(&mut ChaCha12Rng) -> f64| (0..n).map(|_| f(&mut rng)).collect::<Vec<_>>();
    let xs: Vec<Vec<f64>> = match kernel {
        "div" => {
            let den = draw(&mut |r| {
                let s = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                s * log_uniform(r, 1.0 / 16.0, 1024.0)
            });
            let q = draw(&mut |r| r.random_range(-1023.0..1023.0));
            let num = den.iter().zip(&q).map(|(d, q)| (q * d).clamp(-1023.0, 1023.0)).collect();
            vec![num, den]
        }
        "sqrt" => vec![draw(&mut |r| log_uniform(r, 1.0 / 1024.0, 1024.0))],
        "ln" => vec![draw(&mut |r| log_uniform(r, 1.0 / 1048576.0, 1024.0))],
        "sin" | "cos" => vec![draw(&mut |r| r.random_range(0.0..2.0 * PI))],
        "sigmoid" => vec![draw(&mut |r| r.random_range(-64.0..64.0))],
        other => return Err(crate::Error::InvalidConfig(format!("unknown kernel `{other}`"))),
    };
    xs.iter().map(|v| cfg.encode_vec(v)).collect()
}

/// Evaluates `kernel` with either backend.
pub fn eval_kernel<A: Arith>(a: &mut A, kernel: &str, inputs: &[Vec<u64>]) -> Result<Vec<u64>> {
    match kernel {
        "div" => pi_div(a, &inputs[0], &inputs[1]),
        "sqrt" => pi_sqrt(a, &inputs[0]),
        "ln" => pi_ln(a, &inputs[0]),
        "sin" => Ok(pi_sin_cos(a, &inputs[0])?.0),
        "cos" => Ok(pi_sin_cos(a, &inputs[0])?.1),
        "sigmoid" => pi_sigmoid(a, &inputs[0]),
        other => Err(crate::Error::InvalidConfig(format!("unknown kernel `{other}`"))),
    }
}

/// The exact function on decoded inputs.
pub fn reference(kernel: &str, args: &[f64]) -> f64 {
    match kernel {
        "div" => args[0] / args[1],
        "sqrt" => args[0].sqrt(),
        "ln" => args[0].ln(),
        "sin" => args[0].sin(),
        "cos" => args[0].cos(),
        _ => 1.0 / (1.0 + (-args[0]).exp()),
    }
}

fn mpc_run(cfg: RingConfig, kernel: &str, inputs: &[Vec<u64>], seed: u64) -> Result<(Vec<u64>, ProtoStats)> {
    let shared: Vec<(Vec<u64>, Vec<u64>)> = inputs
        .iter()
        .enumerate()
        .map(|(i, v)| share_for(&cfg, v, seed + i as u64))
        .collect();
    let [a, b] = run_pair(cfg, seed, |p| {
        let mine: Vec<Vec<u64>> = shared
            .iter()
            .map(|(s0, s1)| if p.id().index() == 0 { s0.clone() } else { s1.clone() })
            .collect();
        let out = provisioned(p, |q| eval_kernel(q, kernel, &mine))?;
        Ok((out, p.transcript().total()))
    })?;
    Ok((reveal(&cfg, &a.0, &b.0), a.1))
}

/// Measures every kernel on `samples` random inputs with the clear mirror,
/// then runs `mpc_elements` of them twice under sharing, on different
/// inputs, to compare transcripts and check bit-exactness.
pub fn kernel_bench(cfg: RingConfig, samples: usize, mpc_elements: usize, seed: u64) -> Result<Vec<KernelBenchRow>> {
    let mut rows = Vec::new();
    for (k, kernel) in BENCH_KERNELS.iter().enumerate() {
        let s = seed.wrapping_mul(31).wrapping_add(k as u64);
        let inputs = sample_inputs(&cfg, kernel, samples, s)?;
        let mut clear = ClearArith::new(cfg);
        let got = cfg.decode_vec(&eval_kernel(&mut clear, kernel, &inputs)?);
        let dec: Vec<Vec<f64>> = inputs.iter().map(|v| cfg.decode_vec(v)).collect();
        let max_abs_error = (0..samples)
            .map(|i| {
                let args: Vec<f64> = dec.iter().map(|v| v[i]).collect();
                (got[i] - reference(kernel, &args)).abs()
            })
            .fold(0.0, f64::max);

        let m = mpc_elements.min(samples);
        let first: Vec<Vec<u64>> = inputs.iter().map(|v| v[..m].to_vec()).collect();
        let second = sample_inputs(&cfg, kernel, m, s ^ 0x5eed)?;
        let started = Instant::now();
        let (out_a, stats_a) = mpc_run(cfg, kernel, &first, s)?;
        let seconds = started.elapsed().as_secs_f64();
        let (_, stats_b) = mpc_run(cfg, kernel, &second, s + 100)?;
        let mirror = eval_kernel(&mut ClearArith::new(cfg), kernel, &first)?;
        rows.push(KernelBenchRow {
            kernel,
            samples,
            max_abs_error,
            tolerance: tolerance(kernel).map(|t| t.abs_error).unwrap_or(f64::NAN),
            mpc_elements: m,
            mpc: ProtoStats { seconds, ..stats_a },
            oblivious: stats_a.counts() == stats_b.counts(),
            matches_mirror: out_a == mirror,
        });
    }
    Ok(rows)
}
