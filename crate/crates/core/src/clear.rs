//! Plaintext reference trainers, clear output perturbation and the
//! train-locally-then-average baseline.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::{normalize_rows, OwnerData};
use crate::dp::DpParams;
use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::math::{div_with, pi_sigmoid, sqrt_with, ClearArith};
use crate::ml::{backward_shift, glorot_draw, norm_specs, TrainingConfig, UPDATE_SHIFT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Same encoding, truncation and approximations as the shared trainer.
    MirrorFixedPoint,
    /// Doubles and the exact logistic function.
    FloatExact,
}

/// A plaintext model with what is needed to retrain it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearModel {
    pub weights: Vec<f64>,
    pub epochs: usize,
    pub alpha: f64,
    pub lambda_reg: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl ClearModel {
    fn from_cfg(weights: Vec<f64>, cfg: &TrainingConfig, seed: u64) -> Self {
        ClearModel {
            weights,
            epochs: cfg.epochs,
            alpha: cfg.alpha,
            lambda_reg: cfg.lambda_reg,
            momentum: cfg.momentum,
            seed,
        }
    }
}

fn with_bias(x: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (m + 1));
    for i in 0..n {
        out.extend_from_slice(&x[i * m..(i + 1) * m]);
        out.push(1.0);
    }
    out
}

/// Trains on rows that are already L2-normalized.
pub fn train_lr_clear(
    x: &[f64],
    t: &[f64],
    n: usize,
    m: usize,
    cfg: &TrainingConfig,
    seed: u64,
    mode: TrainMode,
) -> Result<ClearModel> {
    cfg.validate()?;
    if x.len() != n * m || t.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            got: x.len(),
        });
    }
    let (x, m) = if cfg.bias {
        (with_bias(x, n, m), m + 1)
    } else {
        (x.to_vec(), m)
    };
    match mode {
        TrainMode::FloatExact => {
            let w = train_float(&x, t, n, m, cfg, seed)?;
            Ok(ClearModel::from_cfg(w, cfg, seed))
        }
        TrainMode::MirrorFixedPoint => {
            let rc = RingConfig::default();
            let xr = rc.encode_vec(&x)?;
            let tr = rc.encode_vec(t)?;
            let w = mirror_train(&rc, &xr, &tr, n, m, cfg, seed)?;
            Ok(ClearModel::from_cfg(rc.decode_vec(&w), cfg, seed))
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn train_float(x: &[f64], t: &[f64], n: usize, m: usize, cfg: &TrainingConfig, seed: u64) -> Result<Vec<f64>> {
    let mut w = glorot_draw(m, seed);
    let mut v = vec![0.0; m];
    for epoch in 0..cfg.epochs {
        let mut g = vec![0.0; m];
        for i in 0..n {
            let row = &x[i * m..(i + 1) * m];
            let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let e = sigmoid(z) - t[i];
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += xj * e;
            }
        }
        for j in 0..m {
            let gj = g[j] / n as f64;
            v[j] = cfg.momentum * v[j] - cfg.alpha * gj - cfg.lambda_reg * cfg.alpha * w[j];
            w[j] += v[j];
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { epoch });
        }
    }
    Ok(w)
}

/// Row normalization with the shared kernels' fixed-point semantics, on
/// raw ring values.
pub fn mirror_normalize(rc: &RingConfig, x: &[u64], m: usize) -> Result<Vec<u64>> {
    if m == 0 || x.is_empty() {
        return Ok(x.to_vec());
    }
    let mut a = ClearArith::new(*rc);
    let (sq, dv) = norm_specs(rc);
    let sums: Vec<u64> = x
        .chunks(m)
        .map(|r| r.iter().fold(0u64, |acc, &v| rc.add(acc, rc.mul(v, v))))
        .collect();
    let norms = sqrt_with(&mut a, &sums, &sq)?;
    let ones = vec![1u64 << dv.num_frac; norms.len()];
    let inv = div_with(&mut a, &ones, &norms, &dv)?;
    Ok(x
        .iter()
        .enumerate()
        .map(|(k, &v)| rc.truncate(rc.mul(v, inv[k / m]), dv.out_frac))
        .collect())
}

/// Full-batch training on raw ring values with exactly the shared
/// trainer's arithmetic. Returns raw weights.
pub fn mirror_train(
    rc: &RingConfig,
    x: &[u64],
    t: &[u64],
    n: usize,
    m: usize,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<Vec<u64>> {
    let l = rc.frac_bits;
    let mut a = ClearArith::new(*rc);
    let mut w = rc.encode_vec(&glorot_draw(m, seed))?;
    let mut v = vec![0u64; m];
    let sn = backward_shift(rc);
    let inv_n = (2f64.powi(sn as i32) / n.max(1) as f64).round() as u64;
    let [k_c, k_a, k_la] = cfg.update_constants(rc);
    for _ in 0..cfg.epochs {
        let z: Vec<u64> = (0..n)
            .map(|i| {
                let dot = x[i * m..(i + 1) * m]
                    .iter()
                    .zip(&w)
                    .fold(0u64, |acc, (&a, &b)| rc.add(acc, rc.mul(a, b)));
                rc.truncate(dot, l)
            })
            .collect();
        let p = pi_sigmoid(&mut a, &z)?;
        let mut g = vec![0u64; m];
        for i in 0..n {
            let e = rc.sub(p[i], t[i]);
            for j in 0..m {
                g[j] = rc.add(g[j], rc.mul(x[i * m + j], e));
            }
        }
        for j in 0..m {
            let gj = rc.truncate(rc.mul(g[j], inv_n), l + sn);
            let wide = rc.sub(rc.sub(rc.mul(k_c, v[j]), rc.mul(k_a, gj)), rc.mul(k_la, w[j]));
            v[j] = rc.truncate(wide, UPDATE_SHIFT);
            w[j] = rc.add(w[j], v[j]);
        }
    }
    Ok(w)
}

/// Normalizes, optionally appends the bias column, and trains in mirror
/// mode on the encodings of `x` and `t`. Mirrors the shared pipeline.
pub fn mirror_pipeline(
    rc: &RingConfig,
    x: &[f64],
    t: &[f64],
    n: usize,
    m: usize,
    cfg: &TrainingConfig,
    seed: u64,
    skip_norm: bool,
) -> Result<Vec<u64>> {
    let mut xr = rc.encode_vec(x)?;
    let tr = rc.encode_vec(t)?;
    if !skip_norm {
        xr = mirror_normalize(rc, &xr, m)?;
    }
    let mut m = m;
    if cfg.bias {
        let one = 1u64 << rc.frac_bits;
        let mut out = Vec::with_capacity(n * (m + 1));
        for i in 0..n {
            out.extend_from_slice(&xr[i * m..(i + 1) * m]);
            out.push(one);
        }
        xr = out;
        m += 1;
    }
    mirror_train(rc, &xr, &tr, n, m, cfg, seed)
}

/// A uniform direction on the unit sphere and a `Gamma(d, c)` magnitude.
pub fn sample_noise<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    if d == 0 {
        return Vec::new();
    }
    let s: Vec<f64> = loop {
        let s: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if s.iter().any(|v: &f64| *v != 0.0) {
            break s;
        }
    };
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gamma = Gamma::new(d as f64, scale)
        .map(|g| g.sample(rng))
        .unwrap_or(0.0);
    s.iter().map(|v| gamma * v / norm).collect()
}

/// Adds output-perturbation noise calibrated to `dp.n`, the number of
/// examples the model was trained on.
pub fn perturb_clear<R: Rng + ?Sized>(model: &ClearModel, dp: &DpParams, rng: &mut R) -> Result<ClearModel> {
    dp.validate()?;
    let eta = sample_noise(model.weights.len(), dp.scale(), rng);
    let mut out = model.clone();
    for (w, e) in out.weights.iter_mut().zip(eta) {
        *w += e;
    }
    Ok(out)
}

/// Per-owner run of the baseline, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnerRun {
    pub n_owner: usize,
    pub scale: f64,
    pub noisy: ClearModel,
}

/// Owners' locally trained models with their example counts.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModels {
    pub models: Vec<(ClearModel, usize)>,
}

/// Each owner normalizes its rows and trains in floating point.
pub fn baseline_local_models(owners: &[OwnerData], cfg: &TrainingConfig, seed: u64) -> Result<LocalModels> {
    let first = owners.first().ok_or(Error::PlanInvalid("no owners".into()))?;
    if owners.iter().any(|o| o.columns != first.columns || o.t.is_none()) {
        return Err(Error::VerticalUnsupported);
    }
    let mut models = Vec::with_capacity(owners.len());
    for o in owners {
        let ds = o.dataset()?;
        let x = normalize_rows(&ds.x, ds.m);
        let model = train_lr_clear(&x, &ds.t, ds.n, ds.m, cfg, seed, TrainMode::FloatExact)?;
        models.push((model, ds.n));
    }
    Ok(LocalModels { models })
}

impl LocalModels {
    /// Every owner perturbs its model with its own example count (no noise
    /// when `epsilon` is `None`); the noisy models are averaged without
    /// weights.
    pub fn draw<R: Rng + ?Sized>(&self, epsilon: Option<f64>, rng: &mut R) -> Result<(ClearModel, Vec<OwnerRun>)> {
        let mut runs = Vec::with_capacity(self.models.len());
        for (model, n) in &self.models {
            let (noisy, scale) = match epsilon {
                Some(eps) => {
                    let dp = DpParams::new(eps, model.lambda_reg, *n, model.weights.len())?;
                    (perturb_clear(model, &dp, rng)?, dp.scale())
                }
                None => (model.clone(), 0.0),
            };
            runs.push(OwnerRun {
                n_owner: *n,
                scale,
                noisy,
            });
        }
        let d = runs[0].noisy.weights.len();
        let mut avg = vec![0.0; d];
        for r in &runs {
            for (a, w) in avg.iter_mut().zip(&r.noisy.weights) {
                *a += w / runs.len() as f64;
            }
        }
        let mut out = runs[0].noisy.clone();
        out.weights = avg;
        Ok((out, runs))
    }
}

/// Trains locally at every owner, perturbs and averages: one draw of the
/// baseline.
pub fn baseline_fl<R: Rng + ?Sized>(
    owners: &[OwnerData],
    cfg: &TrainingConfig,
    epsilon: f64,
    seed: u64,
    rng: &mut R,
) -> Result<(ClearModel, Vec<OwnerRun>)> {
    baseline_local_models(owners, cfg, seed)?.draw(Some(epsilon), rng)
}

/// Mean log-loss plus `(Lambda / 2) |w|^2` in floating point.
pub fn regularized_loss(x: &[f64], t: &[f64], w: &[f64], lambda_reg: f64) -> f64 {
    let m = w.len();
    let n = t.len();
    let mut loss = 0.0;
    for i in 0..n {
        let z: f64 = x[i * m..(i + 1) * m].iter().zip(w).map(|(a, b)| a * b).sum();
        // log(1 + e^z) - t z, stable for either sign of z
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        loss += softplus - t[i] * z;
    }
    loss / n.max(1) as f64 + 0.5 * lambda_reg * w.iter().map(|v| v * v).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{partition, synth_data, PartitionMode, PartitionPlan};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn float_trainer_separates_toy_data() {
        let x = [1.0, 0.2, 0.9, -0.1, -1.0, 0.1, -0.8, -0.3];
        let t = [1.0, 1.0, 0.0, 0.0];
        let x = normalize_rows(&x, 2);
        let cfg = TrainingConfig {
            epochs: 500,
            lambda_reg: 0.01,
            ..Default::default()
        };
        let m = train_lr_clear(&x, &t, 4, 2, &cfg, 1, TrainMode::FloatExact).unwrap();
        let acc = (0..4)
            .filter(|&i| {
                let z = x[2 * i] * m.weights[0] + x[2 * i + 1] * m.weights[1];
                (z >= 0.0) == (t[i] == 1.0)
            })
            .count();
        assert_eq!(acc, 4);
    }

    #[test]
    fn stronger_regularization_shrinks_weights() {
        let ds = synth_data(100, 5, 3, 1.0);
        let x = normalize_rows(&ds.x, ds.m);
        let mut prev = f64::INFINITY;
        for lambda_reg in [1.0, 10.0, 100.0, 1000.0] {
            let cfg = TrainingConfig {
                lambda_reg,
                alpha: 0.5 / lambda_reg,
                momentum: 0.0,
                epochs: 300,
                bias: false,
            };
            let m = train_lr_clear(&x, &ds.t, ds.n, ds.m, &cfg, 2, TrainMode::FloatExact).unwrap();
            let norm = m.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < prev, "{norm} >= {prev}");
            prev = norm;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn perturbation_is_deterministic_and_vanishes() {
        let model = ClearModel {
            weights: vec![0.1, 0.2, 0.3],
            epochs: 0,
            alpha: 0.1,
            lambda_reg: 1.0,
            momentum: 0.9,
            seed: 0,
        };
        let dp = DpParams::new(1.0, 1.0, 100, 3).unwrap();
        let a = perturb_clear(&model, &dp, &mut ChaCha12Rng::seed_from_u64(5)).unwrap();
        let b = perturb_clear(&model, &dp, &mut ChaCha12Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.weights, model.weights);
        let inf = DpParams::new(f64::INFINITY, 1.0, 100, 3).unwrap();
        let c = perturb_clear(&model, &inf, &mut ChaCha12Rng::seed_from_u64(5)).unwrap();
        assert_eq!(c.weights, model.weights);
    }

    #[test]
    fn baseline_uses_owner_counts_and_rejects_vertical() {
        let ds = synth_data(90, 6, 1, 1.0);
        let plan = PartitionPlan::even(PartitionMode::Horizontal, 3, 90).unwrap();
        let owners = partition(&ds, &plan).unwrap();
        let cfg = TrainingConfig {
            epochs: 5,
            ..Default::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (_, runs) = baseline_fl(&owners, &cfg, 1.0, 7, &mut rng).unwrap();
        for r in &runs {
            assert_eq!(r.n_owner, 30);
            assert!((r.scale - 2.0 / 30.0).abs() < 1e-15);
        }
        let vplan = PartitionPlan::even(PartitionMode::Vertical, 2, 6).unwrap();
        let vowners = partition(&ds, &vplan).unwrap();
        assert!(matches!(
            baseline_fl(&vowners, &cfg, 1.0, 7, &mut rng),
            Err(Error::VerticalUnsupported)
        ));
    }
}
