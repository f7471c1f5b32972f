//! Fixed-point encoding of reals as integers modulo `2^lambda`.
//!
//! A real `x` is represented by `round(x * 2^l) mod 2^lambda`, read back in
//! two's complement. All parties of a session must use the same
//! [`RingConfig`]; every protocol in this crate relies on the encoding being
//! bit-identical across parties.

use crate::error::{Error, Result};

/// Raw ring element. Only the low `lambda` bits are meaningful.
pub type RingElement = u64;

/// Ring width and fractional precision shared by all parties of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingConfig {
    /// Bit width of the ring, 32 or 64.
    pub lambda: u32,
    /// Number of fractional bits `l`.
    pub frac_bits: u32,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            lambda: 64,
            frac_bits: 20,
        }
    }
}

impl RingConfig {
    pub fn new(lambda: u32, frac_bits: u32) -> Result<Self> {
        let cfg = RingConfig { lambda, frac_bits };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks `lambda in {32, 64}` and `2l + 2 <= lambda`.
    pub fn validate(&self) -> Result<()> {
        if self.lambda != 32 && self.lambda != 64 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be 32 or 64, got {}",
                self.lambda
            )));
        }
        if 2 * self.frac_bits + 2 > self.lambda {
            return Err(Error::InvalidConfig(format!(
                "frac_bits {} leaves no headroom in a {}-bit ring (need 2l+2 <= lambda)",
                self.frac_bits, self.lambda
            )));
        }
        Ok(())
    }

    /// Integer headroom exponent `lambda - 2l - 1`.
    ///
    /// A fixed-point product `x*y` can be truncated exactly while its real
    /// magnitude stays below `2^(int_bits - 1)`.
    pub fn int_bits(&self) -> u32 {
        self.lambda - 2 * self.frac_bits - 1
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        if self.lambda == 64 {
            u64::MAX
        } else {
            (1u64 << self.lambda) - 1
        }
    }

    #[inline]
    pub fn wrap(&self, x: u64) -> u64 {
        x & self.mask()
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        self.wrap(a.wrapping_add(b))
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.wrap(a.wrapping_sub(b))
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.wrap(a.wrapping_mul(b))
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        self.wrap(a.wrapping_neg())
    }

    /// Two's-complement reading of a ring element.
    #[inline]
    pub fn to_signed(&self, r: u64) -> i64 {
        let shift = 64 - self.lambda;
        ((r << shift) as i64) >> shift
    }

    #[inline]
    pub fn from_signed(&self, v: i64) -> u64 {
        self.wrap(v as u64)
    }

    /// Largest magnitude (exclusive) that [`encode`](Self::encode) accepts.
    pub fn max_magnitude(&self) -> f64 {
        2f64.powi((self.lambda - self.frac_bits - 1) as i32)
    }

    /// `round(x * 2^l) mod 2^lambda`, rounding half away from zero.
    pub fn encode(&self, x: f64) -> Result<RingElement> {
        if !x.is_finite() || x.abs() >= self.max_magnitude() {
            return Err(Error::MagnitudeOverflow { value: x });
        }
        let scaled = (x * self.scale()).round();
        Ok(self.from_signed(scaled as i64))
    }

    /// Interprets `r` as signed and divides by `2^l`.
    pub fn decode(&self, r: RingElement) -> f64 {
        self.to_signed(r) as f64 / self.scale()
    }

    /// Arithmetic right shift by `bits` in the signed reading.
    pub fn truncate(&self, r: RingElement, bits: u32) -> RingElement {
        self.from_signed(self.to_signed(r) >> bits)
    }

    pub fn scale(&self) -> f64 {
        2f64.powi(self.frac_bits as i32)
    }

    /// Encoding of the integer `v` at fixed-point scale (i.e. `v * 2^l`).
    pub fn encode_int(&self, v: i64) -> RingElement {
        self.from_signed(v << self.frac_bits)
    }

    pub fn encode_vec(&self, xs: &[f64]) -> Result<Vec<RingElement>> {
        xs.iter().map(|&x| self.encode(x)).collect()
    }

    pub fn decode_vec(&self, rs: &[RingElement]) -> Vec<f64> {
        rs.iter().map(|&r| self.decode(r)).collect()
    }
}

/// A ring element paired with the configuration that gives it meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointValue {
    pub raw: RingElement,
    pub config: RingConfig,
}

impl FixedPointValue {
    pub fn encode(x: f64, config: RingConfig) -> Result<Self> {
        Ok(FixedPointValue {
            raw: config.encode(x)?,
            config,
        })
    }

    pub fn to_f64(&self) -> f64 {
        self.config.decode(self.raw)
    }
}
