//! Polynomial approximations used by the kernels.
//!
//! Each target function is interpolated at Chebyshev nodes on `[-1, 1]` and
//! the interpolant is converted to monomial form so it can be evaluated by
//! Horner's rule in fixed point.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Monomial coefficients, lowest degree first, of the degree-`degree`
/// Chebyshev interpolant of `f` on `[-1, 1]`.
pub fn chebyshev_fit(f: impl Fn(f64) -> f64, degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let nodes: Vec<f64> = (0..n)
        .map(|k| (PI * (k as f64 + 0.5) / n as f64).cos())
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    // Chebyshev coefficients by the discrete orthogonality relation
    let mut cheb = vec![0.0; n];
    for (j, c) in cheb.iter_mut().enumerate() {
        let s: f64 = (0..n)
            .map(|k| values[k] * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
            .sum();
        *c = 2.0 * s / n as f64;
    }
    cheb[0] *= 0.5;
    // T_0 = 1, T_1 = t, T_{j+1} = 2t T_j - T_{j-1}
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut p = vec![0.0; n];
        match j {
            0 => p[0] = 1.0,
            1 => p[1] = 1.0,
            _ => {
                for i in 0..n - 1 {
                    p[i + 1] = 2.0 * basis[j - 1][i];
                }
                for i in 0..n {
                    p[i] -= basis[j - 2][i];
                }
            }
        }
        basis.push(p);
    }
    let mut out = vec![0.0; n];
    for (c, p) in cheb.iter().zip(&basis) {
        for (o, &t) in out.iter_mut().zip(p) {
            *o += c * t;
        }
    }
    out
}

pub fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

pub const SIGMOID_DEGREE: usize = 7;
pub const LN_DEGREE: usize = 7;
pub const RSQRT_DEGREE: usize = 2;
pub const TRIG_DEGREE: usize = 5;

/// `sigmoid(4(t + 1))`, i.e. the logistic function on `[0, 8]`.
pub fn sigmoid_poly() -> &'static [f64] {
    static P: OnceLock<Vec<f64>> = OnceLock::new();
    P.get_or_init(|| chebyshev_fit(|t| 1.0 / (1.0 + (-4.0 * (t + 1.0)).exp()), SIGMOID_DEGREE))
}

/// `ln((t + 3) / 4)`, the log of a mantissa in `[0.5, 1]`.
pub fn ln_poly() -> &'static [f64] {
    static P: OnceLock<Vec<f64>> = OnceLock::new();
    P.get_or_init(|| chebyshev_fit(|t| ((t + 3.0) / 4.0).ln(), LN_DEGREE))
}

/// `1 / sqrt((t + 3) / 4)`, the Newton seed for a mantissa in `[0.5, 1]`.
pub fn rsqrt_poly() -> &'static [f64] {
    static P: OnceLock<Vec<f64>> = OnceLock::new();
    P.get_or_init(|| chebyshev_fit(|t| 1.0 / ((t + 3.0) / 4.0).sqrt(), RSQRT_DEGREE))
}

/// `sin(pi x) / x` as a function of `u = 2x^2 - 1`.
pub fn sin_poly() -> &'static [f64] {
    static P: OnceLock<Vec<f64>> = OnceLock::new();
    P.get_or_init(|| {
        chebyshev_fit(
            |u| {
                let x = ((u + 1.0) / 2.0).max(0.0).sqrt();
                if x == 0.0 {
                    PI
                } else {
                    (PI * x).sin() / x
                }
            },
            TRIG_DEGREE,
        )
    })
}

/// `cos(pi x)` as a function of `u = 2x^2 - 1`.
pub fn cos_poly() -> &'static [f64] {
    static P: OnceLock<Vec<f64>> = OnceLock::new();
    P.get_or_init(|| {
        chebyshev_fit(|u| (PI * ((u + 1.0) / 2.0).max(0.0).sqrt()).cos(), TRIG_DEGREE)
    })
}

/// Hex SHA-256 of every coefficient table. Parties compare it at the
/// handshake since the tables come from the platform's libm.
pub fn table_digest() -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for t in [sigmoid_poly(), ln_poly(), rsqrt_poly(), sin_poly(), cos_poly()] {
        h.update((t.len() as u64).to_le_bytes());
        for c in t {
            h.update(c.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
