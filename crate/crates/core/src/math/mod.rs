//! Fixed-point math kernels written once against [`Arith`], so the same
//! code runs on secret shares ([`Party`]) and on clear ring values
//! ([`ClearArith`]).

pub mod approx;
pub mod kernels;

use crate::error::Result;
use crate::fixed::RingConfig;
use crate::mpc::Party;

pub use kernels::{
    div_with, internal_frac, ln_with, pi_div, pi_gr_random, pi_ln, pi_sigmoid, pi_sin_cos, pi_sqrt, scale_by,
    sigmoid_with, sin_cos_turns, sqrt_with, DivSpec, KernelTolerance, ScaleSpec, SqrtSpec, KERNEL_TOLERANCES,
};

/// Ring operations a kernel may use. Vectors hold one entry per element;
/// bit-valued outputs are item-major.
pub trait Arith {
    fn cfg(&self) -> RingConfig;

    /// This backend's representation of the public constant `c`.
    fn public(&self, c: u64) -> u64;

    fn mul(&mut self, x: &[u64], y: &[u64]) -> Result<Vec<u64>>;

    /// `floor(x / 2^m)` for `|x| < 2^(lambda-2)`.
    fn trunc(&mut self, x: &[u64], m: u32) -> Result<Vec<u64>>;

    /// `[x < 0]` for `|x| < 2^(k-1)`.
    fn ltz(&mut self, x: &[u64], k: u32) -> Result<Vec<u64>>;

    /// One-hot position of the top set bit of `x mod 2^k`, `k` entries per
    /// item.
    fn one_hot_msb(&mut self, x: &[u64], k: u32) -> Result<Vec<u64>>;

    fn enter(&mut self, _label: &str) {}

    fn exit(&mut self) {}

    fn mul_many(&mut self, pairs: &[(&[u64], &[u64])]) -> Result<Vec<Vec<u64>>> {
        let xs: Vec<u64> = pairs.iter().flat_map(|(x, _)| x.iter().copied()).collect();
        let ys: Vec<u64> = pairs.iter().flat_map(|(_, y)| y.iter().copied()).collect();
        let z = self.mul(&xs, &ys)?;
        let mut out = Vec::with_capacity(pairs.len());
        let mut at = 0;
        for (x, _) in pairs {
            out.push(z[at..at + x.len()].to_vec());
            at += x.len();
        }
        Ok(out)
    }

    /// Product of two values with `frac` fractional bits each, rescaled.
    fn fx_mul_at(&mut self, x: &[u64], y: &[u64], frac: u32) -> Result<Vec<u64>> {
        let z = self.mul(x, y)?;
        self.trunc(&z, frac)
    }

    fn add_v(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        let c = self.cfg();
        x.iter().zip(y).map(|(&a, &b)| c.add(a, b)).collect()
    }

    fn sub_v(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        let c = self.cfg();
        x.iter().zip(y).map(|(&a, &b)| c.sub(a, b)).collect()
    }

    fn add_const(&self, x: &[u64], k: u64) -> Vec<u64> {
        let c = self.cfg();
        let k = self.public(k);
        x.iter().map(|&a| c.add(a, k)).collect()
    }

    /// `k - x` for public `k`.
    fn const_sub(&self, k: u64, x: &[u64]) -> Vec<u64> {
        let c = self.cfg();
        let k = self.public(k);
        x.iter().map(|&a| c.sub(k, a)).collect()
    }

    fn scale_v(&self, x: &[u64], k: u64) -> Vec<u64> {
        let c = self.cfg();
        x.iter().map(|&a| c.mul(a, k)).collect()
    }
}

impl Arith for Party {
    fn cfg(&self) -> RingConfig {
        *Party::cfg(self)
    }

    fn public(&self, c: u64) -> u64 {
        Party::public(self, c)
    }

    fn mul(&mut self, x: &[u64], y: &[u64]) -> Result<Vec<u64>> {
        Party::mul(self, x, y)
    }

    fn trunc(&mut self, x: &[u64], m: u32) -> Result<Vec<u64>> {
        Party::trunc(self, x, m)
    }

    fn ltz(&mut self, x: &[u64], k: u32) -> Result<Vec<u64>> {
        Party::ltz(self, x, k)
    }

    fn one_hot_msb(&mut self, x: &[u64], k: u32) -> Result<Vec<u64>> {
        Party::one_hot_msb(self, x, k)
    }

    fn enter(&mut self, label: &str) {
        Party::enter(self, label)
    }

    fn exit(&mut self) {
        Party::exit(self)
    }

    fn mul_many(&mut self, pairs: &[(&[u64], &[u64])]) -> Result<Vec<Vec<u64>>> {
        Party::mul_many(self, pairs)
    }
}

/// Clear evaluation of the kernels over plain ring values. Matches the
/// shared evaluation bit for bit on every in-domain input.
#[derive(Debug, Clone, Copy)]
pub struct ClearArith {
    pub cfg: RingConfig,
}

impl ClearArith {
    pub fn new(cfg: RingConfig) -> Self {
        ClearArith { cfg }
    }
}

impl Arith for ClearArith {
    fn cfg(&self) -> RingConfig {
        self.cfg
    }

    fn public(&self, c: u64) -> u64 {
        c
    }

    fn mul(&mut self, x: &[u64], y: &[u64]) -> Result<Vec<u64>> {
        Ok(x.iter().zip(y).map(|(&a, &b)| self.cfg.mul(a, b)).collect())
    }

    fn trunc(&mut self, x: &[u64], m: u32) -> Result<Vec<u64>> {
        Ok(x.iter().map(|&a| self.cfg.truncate(a, m)).collect())
    }

    fn ltz(&mut self, x: &[u64], k: u32) -> Result<Vec<u64>> {
        Ok(x
            .iter()
            .map(|&a| self.cfg.neg(self.cfg.truncate(a, k - 1)))
            .collect())
    }

    fn one_hot_msb(&mut self, x: &[u64], k: u32) -> Result<Vec<u64>> {
        let mask = if k >= 64 { u64::MAX } else { (1u64 << k) - 1 };
        let mut out = vec![0u64; x.len() * k as usize];
        for (i, &a) in x.iter().enumerate() {
            let a = a & mask;
            if a != 0 {
                let j = 63 - a.leading_zeros() as usize;
                out[i * k as usize + j] = 1;
            }
        }
        Ok(out)
    }
}
