//! Secure L2 row normalization and full-batch logistic regression training
//! on secret-shared data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::math::{div_with, internal_frac, pi_sigmoid, sqrt_with, Arith, DivSpec, SqrtSpec};
use crate::mpc::Party;

/// Fractional bits of the update rule's public constants.
pub const UPDATE_SHIFT: u32 = 20;

/// Hyperparameters shared by both parties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub alpha: f64,
    pub lambda_reg: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Appends a constant-1 feature after normalization.
    pub bias: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha: 0.1,
            lambda_reg: 1.0,
            momentum: 0.9,
            epochs: 100,
            bias: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_reg must be non-negative, got {}",
                self.lambda_reg
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    /// The public integer constants `(C, alpha, Lambda * alpha)` of the
    /// update rule with [`UPDATE_SHIFT`] fractional bits.
    pub fn update_constants(&self, cfg: &RingConfig) -> [u64; 3] {
        let s = 2f64.powi(UPDATE_SHIFT as i32);
        [
            self.momentum,
            self.alpha,
            self.lambda_reg * self.alpha,
        ]
        .map(|c| cfg.from_signed((c * s).round() as i64))
    }
}

/// One party's shares of an `n x m` training matrix (row-major) and its
/// labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretDataset {
    pub x: Vec<u64>,
    pub t: Vec<u64>,
    pub n: usize,
    pub m: usize,
}

impl SecretDataset {
    pub fn new(x: Vec<u64>, t: Vec<u64>, n: usize, m: usize) -> Result<Self> {
        if x.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: x.len(),
            });
        }
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.len(),
            });
        }
        Ok(SecretDataset { x, t, n, m })
    }

    /// Appends a constant-1 column.
    pub fn with_bias<A: Arith>(&self, a: &A) -> SecretDataset {
        let one = a.public(1u64 << a.cfg().frac_bits);
        let mut x = Vec::with_capacity(self.n * (self.m + 1));
        for row in self.x.chunks(self.m.max(1)).take(self.n) {
            x.extend_from_slice(if self.m == 0 { &[] } else { row });
            x.push(one);
        }
        SecretDataset {
            x,
            t: self.t.clone(),
            n: self.n,
            m: self.m + 1,
        }
    }
}

/// Secret-shared weights and momentum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelState {
    pub w: Vec<u64>,
    pub dw: Vec<u64>,
    pub epoch: usize,
}

fn row_sums(cfg: &RingConfig, v: &[u64], width: usize, rows: usize) -> Vec<u64> {
    if width == 0 {
        return vec![0; rows];
    }
    v.chunks(width)
        .map(|r| r.iter().fold(0u64, |acc, &x| cfg.add(acc, x)))
        .collect()
}

fn tile<T: Copy>(v: &[T], times: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len() * times);
    for _ in 0..times {
        out.extend_from_slice(v);
    }
    out
}

fn repeat_each<T: Copy>(v: &[T], times: usize) -> Vec<T> {
    v.iter().flat_map(|&x| std::iter::repeat_n(x, times)).collect()
}

/// Precision plans for the norm and its reciprocal inside [`pi_norm`].
pub fn norm_specs(cfg: &RingConfig) -> (SqrtSpec, DivSpec) {
    let l = cfg.frac_bits;
    let f = internal_frac(cfg);
    (
        SqrtSpec {
            in_frac: 2 * l,
            width: 2 * l + 21,
            newton_frac: f,
            out_frac: f,
        },
        DivSpec {
            num_frac: f,
            den_frac: f,
            den_width: f + 11,
            quot_bits: 8,
            newton_frac: f,
            out_frac: 2 * l,
            den_positive: true,
        },
    )
}

/// Scales each `d`-wide row of `x` to unit L2 norm. Rows must have norm in
/// `[2^-8, 2^10]`; an all-zero row maps to an all-zero row.
pub fn pi_norm<A: Arith>(a: &mut A, x: &[u64], d: usize) -> Result<Vec<u64>> {
    if d == 0 || x.is_empty() {
        return Ok(x.to_vec());
    }
    if x.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d * (x.len() / d + 1),
            got: x.len(),
        });
    }
    let c = a.cfg();
    let rows = x.len() / d;
    let (sq, dv) = norm_specs(&c);
    a.enter("norm");
    let sq_x = a.mul(x, x)?;
    let s = row_sums(&c, &sq_x, d, rows);
    let r = sqrt_with(a, &s, &sq)?;
    let ones = vec![a.public(1u64 << dv.num_frac); rows];
    let inv = div_with(a, &ones, &r, &dv)?;
    let scaled = a.mul(x, &repeat_each(&inv, d))?;
    let out = a.trunc(&scaled, dv.out_frac);
    a.exit();
    out
}

/// The public Glorot-uniform draw for `d` inputs and one output.
pub fn glorot_draw(d: usize, seed: u64) -> Vec<f64> {
    let bound = (6.0 / (d as f64 + 1.0)).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Glorot-uniform initial weights from a public seed, trivially shared.
pub fn pi_init_glorot<A: Arith>(a: &A, d: usize, seed: u64) -> Result<Vec<u64>> {
    let c = a.cfg();
    Ok(c.encode_vec(&glorot_draw(d, seed))?
        .into_iter()
        .map(|v| a.public(v))
        .collect())
}

/// Predictions `sigmoid(X w)`.
pub fn pi_forward<A: Arith>(a: &mut A, ds: &SecretDataset, w: &[u64]) -> Result<Vec<u64>> {
    if w.len() != ds.m {
        return Err(Error::DimensionMismatch {
            expected: ds.m,
            got: w.len(),
        });
    }
    let c = a.cfg();
    a.enter("forward");
    let prods = a.mul(&ds.x, &tile(w, ds.n))?;
    let z = row_sums(&c, &prods, ds.m, ds.n);
    let z = a.trunc(&z, c.frac_bits)?;
    let out = pi_sigmoid(a, &z);
    a.exit();
    out
}

/// Fractional bits of `1/n` inside [`pi_backward`].
pub fn backward_shift(cfg: &RingConfig) -> u32 {
    cfg.lambda - 3 - 2 * cfg.frac_bits
}

/// Gradient of the mean log-loss, `(1/n) X^T (pred - t)`.
pub fn pi_backward<A: Arith>(a: &mut A, ds: &SecretDataset, pred: &[u64]) -> Result<Vec<u64>> {
    if pred.len() != ds.n {
        return Err(Error::DimensionMismatch {
            expected: ds.n,
            got: pred.len(),
        });
    }
    let c = a.cfg();
    a.enter("backward");
    let e = a.sub_v(pred, &ds.t);
    let prods = a.mul(&ds.x, &repeat_each(&e, ds.m))?;
    let mut g = vec![0u64; ds.m];
    for row in prods.chunks(ds.m.max(1)) {
        for (gj, &v) in g.iter_mut().zip(row) {
            *gj = c.add(*gj, v);
        }
    }
    let sn = backward_shift(&c);
    let k = (2f64.powi(sn as i32) / ds.n.max(1) as f64).round() as u64;
    let out = a.trunc(&a.scale_v(&g, k), c.frac_bits + sn);
    a.exit();
    out
}

/// The new momentum `C dw - alpha grad - Lambda alpha w` at
/// `l + UPDATE_SHIFT` fractional bits. Linear, so it never communicates.
pub fn pi_update_linear<A: Arith>(
    a: &A,
    w: &[u64],
    dw: &[u64],
    grad: &[u64],
    cfg: &TrainingConfig,
) -> Vec<u64> {
    let c = a.cfg();
    let [k_c, k_a, k_la] = cfg.update_constants(&c);
    w.iter()
        .zip(dw)
        .zip(grad)
        .map(|((&w, &v), &g)| {
            let t = c.mul(k_c, v);
            let t = c.sub(t, c.mul(k_a, g));
            c.sub(t, c.mul(k_la, w))
        })
        .collect()
}

/// One update step: returns `(w + dw', dw')`.
pub fn pi_update<A: Arith>(
    a: &mut A,
    w: &[u64],
    dw: &[u64],
    grad: &[u64],
    cfg: &TrainingConfig,
) -> Result<(Vec<u64>, Vec<u64>)> {
    a.enter("update");
    let wide = pi_update_linear(a, w, dw, grad, cfg);
    a.exit();
    a.enter("rescale");
    let dw = a.trunc(&wide, UPDATE_SHIFT);
    a.exit();
    let dw = dw?;
    Ok((a.add_v(w, &dw), dw))
}

/// One epoch of full-batch gradient descent with momentum.
pub fn train_epoch<A: Arith>(
    a: &mut A,
    ds: &SecretDataset,
    state: &ModelState,
    cfg: &TrainingConfig,
) -> Result<ModelState> {
    let pred = pi_forward(a, ds, &state.w)?;
    let grad = pi_backward(a, ds, &pred)?;
    let (w, dw) = pi_update(a, &state.w, &state.dw, &grad, cfg)?;
    Ok(ModelState {
        w,
        dw,
        epoch: state.epoch + 1,
    })
}

/// Runs `f` once on a counting party, fetches the material it needs, then
/// runs it for real.
pub fn provisioned<T>(p: &mut Party, f: impl Fn(&mut Party) -> Result<T>) -> Result<T> {
    p.provision_for(|d| f(d).map(|_| ()))?;
    f(p)
}

/// Trains `cfg.epochs` full-batch epochs from the Glorot draw of `seed`.
/// The dataset is used as given; normalize it first with [`pi_norm`].
pub fn pi_lr(p: &mut Party, ds: &SecretDataset, cfg: &TrainingConfig, seed: u64) -> Result<ModelState> {
    cfg.validate()?;
    p.enter("lr");
    let out = (|| {
        let w = pi_init_glorot(p, ds.m, seed)?;
        let mut state = ModelState {
            dw: vec![0; w.len()],
            w,
            epoch: 0,
        };
        if cfg.epochs == 0 {
            return Ok(state);
        }
        // every epoch consumes the same material
        let mut dry = Party::counting(*p.cfg(), p.id(), p.session());
        train_epoch(&mut dry, ds, &state, cfg)?;
        let need = dry.counted().cloned().unwrap_or_default();
        for _ in 0..cfg.epochs {
            p.provision(&need)?;
            state = train_epoch(p, ds, &state, cfg)?;
        }
        Ok(state)
    })();
    p.exit();
    out
}

/// Normalizes rows (unless `skip_norm`), appends the bias column if
/// configured, and trains.
pub fn pi_train_pipeline(
    p: &mut Party,
    ds: &SecretDataset,
    cfg: &TrainingConfig,
    seed: u64,
    skip_norm: bool,
) -> Result<ModelState> {
    let mut ds = ds.clone();
    if !skip_norm {
        let m = ds.m;
        ds.x = provisioned(p, |q| pi_norm(q, &ds.x, m))?;
    }
    if cfg.bias {
        ds = ds.with_bias(p);
    }
    pi_lr(p, &ds, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ClearArith;
    use crate::mpc::sim::{reveal, run_pair, share_for};

    fn cfg() -> RingConfig {
        RingConfig::default()
    }

    fn shared_rows(rows: &[Vec<f64>]) -> (RingConfig, (Vec<u64>, Vec<u64>), usize) {
        let c = cfg();
        let flat: Vec<f64> = rows.concat();
        let raw = c.encode_vec(&flat).unwrap();
        (c, share_for(&c, &raw, 5), rows[0].len())
    }

    #[test]
    fn norm_of_three_four() {
        let (c, (a, b), d) = shared_rows(&[vec![3.0, 4.0], vec![1.0, 0.0], vec![0.0, 0.0]]);
        let out = run_pair(c, 2, |p| {
            let x = if p.id().index() == 0 { a.clone() } else { b.clone() };
            provisioned(p, |q| pi_norm(q, &x, d))
        })
        .unwrap();
        let v = c.decode_vec(&reveal(&c, &out[0], &out[1]));
        let want = [0.6, 0.8, 1.0, 0.0, 0.0, 0.0];
        for (g, w) in v.iter().zip(want) {
            assert!((g - w).abs() < 1e-3, "{v:?}");
        }
        assert_eq!(&v[4..], &[0.0, 0.0]);
    }

    #[test]
    fn norm_over_ring_range() {
        let c = cfg();
        let mut a = ClearArith::new(c);
        for scale in [2f64.powi(-8), 0.3, 1.0, 50.0, 1000.0] {
            let row = [scale * 0.6, -scale * 0.8, 0.0];
            let raw = c.encode_vec(&row).unwrap();
            let out = c.decode_vec(&pi_norm(&mut a, &raw, 3).unwrap());
            let norm: f64 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-3, "scale {scale}: {out:?}");
        }
    }

    #[test]
    fn update_reduces_to_plain_steps() {
        let c = cfg();
        let mut a = ClearArith::new(c);
        let w = c.encode_vec(&[0.5, -1.0]).unwrap();
        let g = c.encode_vec(&[0.25, 0.125]).unwrap();
        let zero = vec![0u64; 2];
        let gd = TrainingConfig {
            alpha: 0.5,
            lambda_reg: 0.0,
            momentum: 0.0,
            ..Default::default()
        };
        let (w1, _) = pi_update(&mut a, &w, &zero, &g, &gd).unwrap();
        assert_eq!(c.decode_vec(&w1), vec![0.375, -1.0625]);
        let decay = TrainingConfig {
            alpha: 0.5,
            lambda_reg: 0.5,
            momentum: 0.0,
            ..Default::default()
        };
        let (w2, _) = pi_update(&mut a, &w, &zero, &zero, &decay).unwrap();
        assert_eq!(c.decode_vec(&w2), vec![0.375, -0.75]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        for bad in [
            TrainingConfig { alpha: 0.0, ..Default::default() },
            TrainingConfig { lambda_reg: -1.0, ..Default::default() },
            TrainingConfig { momentum: 1.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn glorot_is_deterministic_and_bounded() {
        let a = glorot_draw(10_000, 3);
        assert_eq!(a, glorot_draw(10_000, 3));
        let b = (6.0f64 / 10_001.0).sqrt();
        assert!(a.iter().all(|v| v.abs() <= b));
        assert!(a.iter().any(|v| v.abs() > 0.9 * b));
    }
}
