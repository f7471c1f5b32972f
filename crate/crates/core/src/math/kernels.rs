//! Division, square root, logarithm, sine/cosine, sigmoid and uniform
//! sampling on fixed-point values.
//!
//! Every kernel has a fixed, input-independent sequence of operations, so
//! round and byte counts depend only on the number of elements. Inputs
//! outside a kernel's documented domain produce unspecified values rather
//! than errors, since no party can see them.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::math::approx::{cos_poly, ln_poly, rsqrt_poly, sigmoid_poly, sin_poly};
use crate::math::Arith;
use crate::mpc::Party;

/// Absolute error bound of a kernel on its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTolerance {
    pub kernel: &'static str,
    pub abs_error: f64,
    /// Range of the (first) input on which the bound is guaranteed.
    pub domain: (f64, f64),
}

pub const KERNEL_TOLERANCES: [KernelTolerance; 6] = [
    KernelTolerance {
        kernel: "div",
        abs_error: 1.0 / 16384.0,
        domain: (-1024.0, 1024.0),
    },
    KernelTolerance {
        kernel: "sqrt",
        abs_error: 1.0 / 4096.0,
        domain: (1.0 / 1024.0, 1024.0),
    },
    KernelTolerance {
        kernel: "ln",
        abs_error: 1.0 / 4096.0,
        domain: (1.0 / 1048576.0, 1024.0),
    },
    KernelTolerance {
        kernel: "sin",
        abs_error: 1.0 / 4096.0,
        domain: (0.0, 2.0 * PI),
    },
    KernelTolerance {
        kernel: "cos",
        abs_error: 1.0 / 4096.0,
        domain: (0.0, 2.0 * PI),
    },
    KernelTolerance {
        kernel: "sigmoid",
        abs_error: 1e-3,
        domain: (-64.0, 64.0),
    },
];

pub fn tolerance(kernel: &str) -> Option<KernelTolerance> {
    KERNEL_TOLERANCES.iter().copied().find(|t| t.kernel == kernel)
}

/// Working precision of Newton iterations and mantissa polynomials.
pub fn internal_frac(cfg: &RingConfig) -> u32 {
    if cfg.lambda >= 64 {
        30
    } else {
        cfg.frac_bits.min(13)
    }
}

fn trig_frac(cfg: &RingConfig) -> u32 {
    if cfg.lambda >= 64 {
        28
    } else {
        cfg.frac_bits.min(12)
    }
}

/// Default comparison width of the sigmoid: exact for `|z| < 2^(width-1-l)`.
pub fn sigmoid_width(cfg: &RingConfig) -> u32 {
    (cfg.frac_bits + 20).min(cfg.lambda - 1)
}

/// `round(c * 2^frac)` as a ring element.
pub fn fx_const(cfg: &RingConfig, c: f64, frac: u32) -> u64 {
    cfg.from_signed((c * 2f64.powi(frac as i32)).round() as i64)
}

/// `x * 2^-s` for `s > 0` (exact floor), `x * 2^-s` by scaling for `s < 0`.
fn shift<A: Arith>(a: &mut A, x: &[u64], s: i64) -> Result<Vec<u64>> {
    match s {
        0 => Ok(x.to_vec()),
        s if s > 0 => a.trunc(x, s as u32),
        s => Ok(a.scale_v(x, 1u64 << (-s))),
    }
}

/// `sum_i h[i] * table(i)` per item, local.
fn dot_hot<A: Arith>(a: &A, h: &[u64], width: usize, table: impl Fn(usize) -> u64) -> Vec<u64> {
    let c = a.cfg();
    let consts: Vec<u64> = (0..width).map(table).collect();
    h.chunks(width)
        .map(|row| {
            row.iter()
                .zip(&consts)
                .fold(0u64, |acc, (&b, &k)| c.add(acc, c.mul(b, k)))
        })
        .collect()
}

/// Evaluates several polynomials at the same points by Horner's rule with
/// `frac` fractional bits throughout. `t` must carry `frac` bits.
pub fn horner_many<A: Arith>(
    a: &mut A,
    t: &[u64],
    polys: &[&[f64]],
    frac: u32,
) -> Result<Vec<Vec<u64>>> {
    let c = a.cfg();
    let n = t.len();
    let deg = polys.iter().map(|p| p.len()).max().unwrap_or(1).saturating_sub(1);
    let coef = |p: &[f64], k: usize| fx_const(&c, p.get(k).copied().unwrap_or(0.0), frac);
    if deg == 0 {
        return Ok(polys
            .iter()
            .map(|p| vec![a.public(coef(p, 0)); n])
            .collect());
    }
    // the leading coefficient is public, so the first product is local
    let mut ys: Vec<u64> = Vec::with_capacity(n * polys.len());
    for p in polys {
        ys.extend(a.scale_v(t, coef(p, deg)));
    }
    ys = a.trunc(&ys, frac)?;
    let mut k = deg - 1;
    loop {
        for (j, p) in polys.iter().enumerate() {
            let kc = a.public(coef(p, k));
            for y in &mut ys[j * n..(j + 1) * n] {
                *y = c.add(*y, kc);
            }
        }
        if k == 0 {
            break;
        }
        let ts: Vec<u64> = (0..polys.len()).flat_map(|_| t.iter().copied()).collect();
        ys = a.fx_mul_at(&ys, &ts, frac)?;
        k -= 1;
    }
    Ok(ys.chunks(n.max(1)).map(|c| c.to_vec()).collect::<Vec<_>>().into_iter().take(polys.len()).collect())
}

pub fn horner<A: Arith>(a: &mut A, t: &[u64], poly: &[f64], frac: u32) -> Result<Vec<u64>> {
    if t.is_empty() {
        return Ok(Vec::new());
    }
    Ok(horner_many(a, t, &[poly], frac)?.remove(0))
}

/// One-hot top bit of `x` (width `k`) and the mantissa `x / 2^(i+1)` in
/// `[0.5, 1)` with `frac` fractional bits, where `2^i <= x < 2^(i+1)`.
fn normalize<A: Arith>(a: &mut A, x: &[u64], k: u32, frac: u32) -> Result<(Vec<u64>, Vec<u64>)> {
    let h = a.one_hot_msb(x, k)?;
    let kw = k as usize;
    if frac >= k {
        let v = dot_hot(a, &h, kw, |i| 1u64 << (frac as usize - 1 - i));
        let m = a.mul(x, &v)?;
        Ok((h, m))
    } else {
        let v = dot_hot(a, &h, kw, |i| 1u64 << (kw - 1 - i));
        let m = a.mul(x, &v)?;
        let m = a.trunc(&m, k - frac)?;
        Ok((h, m))
    }
}

/// Precision plan for a division.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivSpec {
    pub num_frac: u32,
    pub den_frac: u32,
    /// `|den|` in raw units is below `2^den_width`.
    pub den_width: u32,
    /// `|num / den|` is below `2^quot_bits`.
    pub quot_bits: u32,
    pub newton_frac: u32,
    pub out_frac: u32,
    /// Skips the sign extraction when the denominator is known positive.
    pub den_positive: bool,
}

impl DivSpec {
    pub fn standard(cfg: &RingConfig) -> DivSpec {
        DivSpec {
            num_frac: cfg.frac_bits,
            den_frac: cfg.frac_bits,
            den_width: cfg.frac_bits + cfg.int_bits(),
            quot_bits: 10.min(cfg.int_bits()),
            newton_frac: internal_frac(cfg),
            out_frac: cfg.frac_bits,
            den_positive: false,
        }
    }
}

/// `a / b` with the standard precision plan. Accurate to `2^-14` when
/// `|a / b| <= 2^10` and `|b|` is at least a few ulps.
pub fn pi_div<A: Arith>(a: &mut A, num: &[u64], den: &[u64]) -> Result<Vec<u64>> {
    let spec = DivSpec::standard(&a.cfg());
    div_with(a, num, den, &spec)
}

/// Division by normalization of the denominator into `[0.5, 1)`, a linear
/// seed and three Newton steps for the reciprocal.
pub fn div_with<A: Arith>(a: &mut A, num: &[u64], den: &[u64], spec: &DivSpec) -> Result<Vec<u64>> {
    if num.len() != den.len() {
        return Err(Error::DimensionMismatch {
            expected: num.len(),
            got: den.len(),
        });
    }
    if num.is_empty() {
        return Ok(Vec::new());
    }
    let c = a.cfg();
    let lam = c.lambda as i64;
    let k = spec.den_width;
    let l_n = spec.newton_frac;
    let p = lam - 3 - spec.quot_bits as i64 - l_n as i64;
    if p < 1 || (p + l_n as i64) < spec.out_frac as i64 {
        return Err(Error::InvalidConfig(format!("division plan {spec:?} does not fit the ring")));
    }
    a.enter("div");
    let (num, den) = if spec.den_positive {
        (num.to_vec(), den.to_vec())
    } else {
        let s = a.ltz(den, k + 1)?;
        let sgn = a.const_sub(1, &a.scale_v(&s, 2));
        let mut r = a.mul_many(&[(num, &sgn), (den, &sgn)])?;
        let d = r.pop().expect("two products");
        (r.pop().expect("two products"), d)
    };
    let h = a.one_hot_msb(&den, k)?;
    let v = dot_hot(a, &h, k as usize, |i| 1u64 << (k as usize - 1 - i));
    let mut r = a.mul_many(&[(&den, &v), (&num, &v)])?;
    let av = r.pop().expect("two products");
    let bv = r.pop().expect("two products");
    let b = shift(a, &bv, k as i64 - l_n as i64)?;
    let sa = k as i64 + spec.num_frac as i64 - spec.den_frac as i64 - p;
    let an = shift(a, &av, sa)?;

    // reciprocal of b in (1, 2]: seed 2.9142 - 2b, then y <- y (2 - b y)
    let mut y = a.const_sub(fx_const(&c, 2.9142, l_n), &a.scale_v(&b, 2));
    for _ in 0..3 {
        let e = a.fx_mul_at(&b, &y, l_n)?;
        let corr = a.const_sub(2u64 << l_n, &e);
        y = a.fx_mul_at(&y, &corr, l_n)?;
    }
    let q = a.mul(&an, &y)?;
    let q = shift(a, &q, p + l_n as i64 - spec.out_frac as i64)?;
    a.exit();
    Ok(q)
}

/// Precision plan for a square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SqrtSpec {
    pub in_frac: u32,
    /// The raw input is below `2^width`.
    pub width: u32,
    pub newton_frac: u32,
    pub out_frac: u32,
}

impl SqrtSpec {
    pub fn standard(cfg: &RingConfig) -> SqrtSpec {
        SqrtSpec {
            in_frac: cfg.frac_bits,
            width: cfg.frac_bits + cfg.int_bits(),
            newton_frac: internal_frac(cfg),
            out_frac: cfg.frac_bits,
        }
    }
}

/// `sqrt(x)` for `x` in `[2^-l, 2^int_bits)`.
pub fn pi_sqrt<A: Arith>(a: &mut A, x: &[u64]) -> Result<Vec<u64>> {
    let spec = SqrtSpec::standard(&a.cfg());
    sqrt_with(a, x, &spec)
}

/// Square root by normalization to a mantissa `m`, a quadratic seed for
/// `1/sqrt(m)`, two Newton steps, and a public per-exponent scale.
pub fn sqrt_with<A: Arith>(a: &mut A, x: &[u64], spec: &SqrtSpec) -> Result<Vec<u64>> {
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let c = a.cfg();
    let k = spec.width;
    let l_n = spec.newton_frac;
    let e_max = (k as i64 - spec.in_frac as i64 + 1).div_euclid(2);
    let gf = (c.lambda as i64 - 4 - l_n as i64 - e_max).min(40);
    if gf < 1 || l_n as i64 + gf < spec.out_frac as i64 {
        return Err(Error::InvalidConfig(format!("square root plan {spec:?} does not fit the ring")));
    }
    a.enter("sqrt");
    let (h, m) = normalize(a, x, k, l_n)?;
    let t = a.add_const(&a.scale_v(&m, 4), c.neg(3u64 << l_n));
    let mut y = horner(a, &t, rsqrt_poly(), l_n)?;
    for _ in 0..2 {
        let y2 = a.fx_mul_at(&y, &y, l_n)?;
        let my2 = a.fx_mul_at(&m, &y2, l_n)?;
        let corr = a.const_sub(3u64 << l_n, &my2);
        let prod = a.mul(&y, &corr)?;
        y = a.trunc(&prod, l_n + 1)?;
    }
    let s = a.fx_mul_at(&m, &y, l_n)?;
    let f_in = spec.in_frac as f64;
    let g = dot_hot(a, &h, k as usize, |i| {
        fx_const(&c, 2f64.powf((i as f64 + 1.0 - f_in) / 2.0), gf as u32)
    });
    let out = a.mul(&s, &g)?;
    let out = shift(a, &out, l_n as i64 + gf - spec.out_frac as i64)?;
    a.exit();
    Ok(out)
}

/// `ln(x)` for `x` in `(0, 2^int_bits)`.
pub fn pi_ln<A: Arith>(a: &mut A, x: &[u64]) -> Result<Vec<u64>> {
    let c = a.cfg();
    ln_with(a, x, c.frac_bits + c.int_bits())
}

/// `ln(x)` for raw `x < 2^width`; a smaller width is cheaper.
pub fn ln_with<A: Arith>(a: &mut A, x: &[u64], width: u32) -> Result<Vec<u64>> {
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let c = a.cfg();
    let l = c.frac_bits;
    let l_n = internal_frac(&c).max(l);
    a.enter("ln");
    let (h, m) = normalize(a, x, width, l_n)?;
    let t = a.add_const(&a.scale_v(&m, 4), c.neg(3u64 << l_n));
    let p = horner(a, &t, ln_poly(), l_n)?;
    let p = a.trunc(&p, l_n - l)?;
    let e = dot_hot(a, &h, width as usize, |i| {
        fx_const(&c, (i as f64 + 1.0 - l as f64) * LN_2, l)
    });
    a.exit();
    Ok(a.add_v(&p, &e))
}

/// `(sin theta, cos theta)` for `theta` in `[0, 2 pi]`.
pub fn pi_sin_cos<A: Arith>(a: &mut A, theta: &[u64]) -> Result<(Vec<u64>, Vec<u64>)> {
    if theta.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let c = a.cfg();
    let f = trig_frac(&c);
    let t = scale_by(
        a,
        theta,
        1.0 / (2.0 * PI),
        &ScaleSpec {
            in_frac: c.frac_bits,
            out_frac: f,
            bound_bits: 3,
        },
    )?;
    sin_cos_turns(a, &t, f)
}

/// `(sin 2 pi t, cos 2 pi t)` for `t` in `[0, 1]` given with `t_frac`
/// fractional bits.
pub fn sin_cos_turns<A: Arith>(a: &mut A, t: &[u64], t_frac: u32) -> Result<(Vec<u64>, Vec<u64>)> {
    if t.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let c = a.cfg();
    let l = c.frac_bits;
    let f = trig_frac(&c);
    a.enter("sin_cos");
    let t = shift(a, t, t_frac as i64 - f as i64)?;
    // x = 2t - 1 in [-1, 1]; sin 2 pi t = -sin(pi x), cos 2 pi t = -cos(pi x)
    let x = a.add_const(&a.scale_v(&t, 2), c.neg(1u64 << f));
    let y = a.fx_mul_at(&x, &x, f)?;
    let u = a.add_const(&a.scale_v(&y, 2), c.neg(1u64 << f));
    let mut polys = horner_many(a, &u, &[sin_poly(), cos_poly()], f)?;
    let cos_p = polys.pop().expect("two polynomials");
    let sin_p = polys.pop().expect("two polynomials");
    let mut both = a.mul(&x, &sin_p)?;
    both.extend(a.scale_v(&cos_p, 1u64 << f));
    let both = a.trunc(&both, 2 * f - l)?;
    let n = t.len();
    let sin = both[..n].iter().map(|&v| c.neg(v)).collect();
    let cos = both[n..].iter().map(|&v| c.neg(v)).collect();
    a.exit();
    Ok((sin, cos))
}

/// Logistic function. Exact 0 below -8 and exact 1 above 8, a symmetric
/// polynomial in between.
pub fn pi_sigmoid<A: Arith>(a: &mut A, z: &[u64]) -> Result<Vec<u64>> {
    let w = sigmoid_width(&a.cfg());
    sigmoid_with(a, z, w)
}

/// Sigmoid with comparison width `width`; valid while `|z| < 2^(width-1-l)`.
pub fn sigmoid_with<A: Arith>(a: &mut A, z: &[u64], width: u32) -> Result<Vec<u64>> {
    if z.is_empty() {
        return Ok(Vec::new());
    }
    let c = a.cfg();
    let l = c.frac_bits;
    let one = 1u64 << l;
    a.enter("sigmoid");
    let s = a.ltz(z, width)?;
    let sgn = a.const_sub(1, &a.scale_v(&s, 2));
    let az = a.mul(z, &sgn)?;
    let big = a.ltz(&a.const_sub(8 << l, &az), width)?;
    let t = a.trunc(&az, 2)?;
    let t = a.add_const(&t, c.neg(one));
    let p = horner(a, &t, sigmoid_poly(), l)?;
    // mirror for negative inputs: p + s (1 - 2p)
    let flip = a.const_sub(one, &a.scale_v(&p, 2));
    let sp = a.mul(&s, &flip)?;
    let mid = a.add_v(&p, &sp);
    // outside [-8, 8] the result is 1 - s exactly
    let tail = a.sub_v(&a.const_sub(one, &a.scale_v(&s, one)), &mid);
    let bt = a.mul(&big, &tail)?;
    a.exit();
    Ok(a.add_v(&mid, &bt))
}

/// Precision plan for multiplying by a public real.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleSpec {
    pub in_frac: u32,
    pub out_frac: u32,
    /// `|x| < 2^bound_bits` as a real number.
    pub bound_bits: u32,
}

/// `c * x` for a public real `c`, encoding `c` with as many fractional
/// bits as the ring allows for inputs below `2^bound_bits`.
pub fn scale_by<A: Arith>(a: &mut A, x: &[u64], c_real: f64, spec: &ScaleSpec) -> Result<Vec<u64>> {
    let c = a.cfg();
    if c_real == 0.0 || x.is_empty() {
        return Ok(vec![0; x.len()]);
    }
    if !c_real.is_finite() {
        return Err(Error::MagnitudeOverflow { value: c_real });
    }
    let lam = c.lambda as i64;
    let ec = c_real.abs().log2().ceil() as i64;
    let mut s = lam - 3 - (spec.in_frac + spec.bound_bits) as i64 - ec;
    s = s.min(lam - 2 + spec.out_frac as i64 - spec.in_frac as i64);
    let k = (c_real * 2f64.powi(s as i32)).round();
    if k == 0.0 {
        return Ok(vec![0; x.len()]);
    }
    let prod = a.scale_v(x, c.from_signed(k as i64));
    shift(a, &prod, spec.in_frac as i64 + s - spec.out_frac as i64)
}

/// Shares of `k / 2^l` with `k` uniform on `{1, ..., 2^l}`, assembled from
/// `l` dealer bits per sample. No communication.
pub fn pi_gr_random(p: &mut Party, n: usize) -> Result<Vec<u64>> {
    let c = *p.cfg();
    let l = c.frac_bits as usize;
    let bits = p.take_bits(n * l)?;
    let one = p.public(1);
    Ok(bits
        .chunks(l.max(1))
        .take(n)
        .map(|b| {
            b.iter()
                .enumerate()
                .fold(one, |acc, (i, &bit)| c.add(acc, c.mul(1u64 << i, bit)))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ClearArith;
    use crate::mpc::sim::{reveal, run_pair, share_for};

    fn cfg() -> RingConfig {
        RingConfig::default()
    }

    fn clear(f: impl FnOnce(&mut ClearArith, &[u64]) -> Result<Vec<u64>>, xs: &[f64]) -> Vec<f64> {
        let c = cfg();
        let mut a = ClearArith::new(c);
        let raw = c.encode_vec(xs).unwrap();
        c.decode_vec(&f(&mut a, &raw).unwrap())
    }

    #[test]
    fn div_examples() {
        let c = cfg();
        let mut a = ClearArith::new(c);
        let num = c.encode_vec(&[1.0, 1.0, 3.0, -5.0, 7.0]).unwrap();
        let den = c.encode_vec(&[1.0, 4.0, 0.5, 2.0, -0.01]).unwrap();
        let q = c.decode_vec(&pi_div(&mut a, &num, &den).unwrap());
        // against the encoded operands; -0.01 is not exact at 20 bits
        let want: Vec<f64> = c.decode_vec(&num).iter().zip(c.decode_vec(&den)).map(|(a, b)| a / b).collect();
        for (g, &w) in q.iter().zip(&want) {
            assert!((g - w).abs() <= 2f64.powi(-14), "{g} vs {w}");
        }
        assert!((q[0] - 1.0).abs() <= 2f64.powi(-20));
    }

    #[test]
    fn sqrt_examples() {
        let got = clear(|a, x| pi_sqrt(a, x), &[4.0, 2.0, 1e-3, 1000.0]);
        let want = [2.0, 2f64.sqrt(), 1e-3f64.sqrt(), 1000f64.sqrt()];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 2f64.powi(-12), "{g} vs {w}");
        }
    }

    #[test]
    fn ln_examples() {
        let e = std::f64::consts::E;
        let got = clear(|a, x| pi_ln(a, x), &[1.0, 0.5, e, 1000.0, 1.0 / 1048576.0]);
        let want = [0.0, 0.5f64.ln(), 1.0, 1000f64.ln(), -20.0 * LN_2];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 2f64.powi(-12), "{g} vs {w}");
        }
    }

    #[test]
    fn sin_cos_examples() {
        let c = cfg();
        let mut a = ClearArith::new(c);
        let th = c.encode_vec(&[0.0, PI / 2.0, PI / 4.0, PI, 2.0 * PI]).unwrap();
        let (s, co) = pi_sin_cos(&mut a, &th).unwrap();
        let (s, co) = (c.decode_vec(&s), c.decode_vec(&co));
        for (i, t) in [0.0, PI / 2.0, PI / 4.0, PI, 2.0 * PI].iter().enumerate() {
            assert!((s[i] - t.sin()).abs() <= 2f64.powi(-12), "sin {t}: {}", s[i]);
            assert!((co[i] - t.cos()).abs() <= 2f64.powi(-12), "cos {t}: {}", co[i]);
        }
    }

    #[test]
    fn sigmoid_examples() {
        let zs = [0.0, 2.0, -2.0, 8.5, -9.0, 100.0, -1000.0, 8.0];
        let got = clear(|a, x| pi_sigmoid(a, x), &zs);
        for (g, z) in got.iter().zip(zs) {
            let want = 1.0 / (1.0 + (-z).exp());
            assert!((g - want).abs() <= 1e-3, "sigmoid({z}) = {g}");
        }
        assert_eq!(got[3], 1.0);
        assert_eq!(got[4], 0.0);
    }

    #[test]
    fn scale_by_handles_tiny_and_large_constants() {
        let c = cfg();
        let mut a = ClearArith::new(c);
        let x = c.encode_vec(&[3.0, -100.0]).unwrap();
        let spec = ScaleSpec {
            in_frac: 20,
            out_frac: 20,
            bound_bits: 10,
        };
        let y = c.decode_vec(&scale_by(&mut a, &x, 0.002, &spec).unwrap());
        assert!((y[0] - 0.006).abs() < 2e-6 && (y[1] + 0.2).abs() < 2e-6);
        let y = c.decode_vec(&scale_by(&mut a, &x, 2f64.powi(-40), &spec).unwrap());
        assert_eq!(y[0], 0.0);
        let y = c.decode_vec(&scale_by(&mut a, &x, 1000.0, &spec).unwrap());
        assert!((y[0] - 3000.0).abs() < 1e-5);
    }

    #[test]
    fn shared_kernels_match_clear_bit_for_bit() {
        let c = cfg();
        let xs = [0.3, 1.0, 4.0, 17.5, 0.001, 250.0];
        let raw = c.encode_vec(&xs).unwrap();
        let th = c.encode_vec(&[0.1, 1.0, 3.0, 4.5, 6.0, 6.28]).unwrap();
        let zs = c.encode_vec(&[-9.0, -3.0, -0.2, 0.0, 1.5, 12.0]).unwrap();
        let run = |a: &mut dyn FnMut(&str, &[u64]) -> Vec<u64>| {
            let mut v = a("div", &raw);
            v.extend(a("sqrt", &raw));
            v.extend(a("ln", &raw));
            v.extend(a("sc", &th));
            v.extend(a("sig", &zs));
            v
        };
        fn kernel<A: Arith>(ar: &mut A, k: &str, x: &[u64], ones: &[u64]) -> Result<Vec<u64>> {
            match k {
                "div" => pi_div(ar, ones, x),
                "sqrt" => pi_sqrt(ar, x),
                "ln" => pi_ln(ar, x),
                "sc" => {
                    let (s, c) = pi_sin_cos(ar, x)?;
                    Ok([s, c].concat())
                }
                _ => pi_sigmoid(ar, x),
            }
        }
        let ones = vec![c.encode(1.0).unwrap(); xs.len()];
        let mut ca = ClearArith::new(c);
        let want = run(&mut |k, x| kernel(&mut ca, k, x, &ones).unwrap());

        let inputs: Vec<(Vec<u64>, Vec<u64>)> = [&raw, &th, &zs, &ones]
            .iter()
            .enumerate()
            .map(|(i, v)| share_for(&c, v, 40 + i as u64))
            .collect();
        let out = run_pair(c, 3, |p| {
            let me = p.id().index();
            let pick = |i: usize| if me == 0 { inputs[i].0.clone() } else { inputs[i].1.clone() };
            let (x, t, z, o) = (pick(0), pick(1), pick(2), pick(3));
            let body = |p: &mut Party| -> Result<Vec<u64>> {
                let mut v = kernel(p, "div", &x, &o)?;
                v.extend(kernel(p, "sqrt", &x, &o)?);
                v.extend(kernel(p, "ln", &x, &o)?);
                v.extend(kernel(p, "sc", &t, &o)?);
                v.extend(kernel(p, "sig", &z, &o)?);
                Ok(v)
            };
            p.provision_for(|d| body(d).map(|_| ()))?;
            body(p)
        })
        .unwrap();
        assert_eq!(reveal(&c, &out[0], &out[1]), want);
    }

    #[test]
    fn gr_random_enumerates_small_range() {
        let c = RingConfig::new(64, 2).unwrap();
        let out = run_pair(c, 9, |p| {
            p.provision(&crate::mpc::Requirements {
                bits: 2 * 400,
                ..Default::default()
            })?;
            pi_gr_random(p, 400)
        })
        .unwrap();
        let vals = c.decode_vec(&reveal(&c, &out[0], &out[1]));
        for want in [0.25, 0.5, 0.75, 1.0] {
            assert!(vals.contains(&want));
        }
        assert!(vals.iter().all(|v| [0.25, 0.5, 0.75, 1.0].contains(v)));
    }
}
