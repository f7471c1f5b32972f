//! Output perturbation inside MPC: a Gaussian direction normalized onto the
//! unit sphere, scaled by a Gamma magnitude built from exponential samples.

use crate::error::{Error, Result};
use crate::math::{ln_with, pi_gr_random, scale_by, sin_cos_turns, sqrt_with, Arith, ScaleSpec, SqrtSpec};
use crate::ml::{pi_norm, provisioned};
use crate::mpc::Party;

/// Runs per provisioning chunk in the batched entry points.
pub const DP_CHUNK_RUNS: usize = 256;

/// Public parameters of the perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpParams {
    pub epsilon: f64,
    pub lambda_reg: f64,
    /// Training examples behind the released model.
    pub n: usize,
    /// Coefficients to perturb.
    pub d: usize,
}

impl DpParams {
    pub fn new(epsilon: f64, lambda_reg: f64, n: usize, d: usize) -> Result<Self> {
        let p = DpParams {
            epsilon,
            lambda_reg,
            n,
            d,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "perturbation needs lambda_reg > 0, got {}",
                self.lambda_reg
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("perturbation needs n > 0".into()));
        }
        Ok(())
    }

    /// `c = 2 / (n epsilon Lambda)`.
    pub fn scale(&self) -> f64 {
        2.0 / (self.n as f64 * self.epsilon * self.lambda_reg)
    }
}

/// One party's shares of a noise draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseVector {
    /// Unit-norm direction.
    pub direction: Vec<u64>,
    pub magnitude: u64,
    /// `magnitude * direction`.
    pub eta: Vec<u64>,
}

/// Box-Muller pairs consumed by a `d`-dimensional Gaussian draw: one per
/// two coordinates, plus a separate pair for the last coordinate when `d`
/// is odd.
pub fn gss_pairs(d: usize) -> usize {
    if d % 2 == 0 {
        d / 2
    } else {
        d.div_ceil(2) + 1
    }
}

/// Box-Muller on shared uniforms `u, v` in `(0, 1]`: returns
/// `(sqrt(-2 ln u) cos 2 pi v, sqrt(-2 ln u) sin 2 pi v)`.
pub fn pi_box_muller<A: Arith>(a: &mut A, u: &[u64], v: &[u64]) -> Result<(Vec<u64>, Vec<u64>)> {
    let c = a.cfg();
    let l = c.frac_bits;
    a.enter("box_muller");
    let ln_u = ln_with(a, u, l + 1)?;
    let y = a.scale_v(&ln_u, c.neg(2));
    // ln 1 may come out a hair above zero
    let neg = a.ltz(&y, l + 7)?;
    let y = a.mul(&y, &a.const_sub(1, &neg))?;
    let r = sqrt_with(
        a,
        &y,
        &SqrtSpec {
            in_frac: l,
            width: l + 5,
            newton_frac: crate::math::internal_frac(&c),
            out_frac: l,
        },
    )?;
    let (sin, cos) = sin_cos_turns(a, v, l)?;
    let prods = a.mul(&[r.clone(), r].concat(), &[cos, sin].concat())?;
    let prods = a.trunc(&prods, l)?;
    a.exit();
    let n = u.len();
    Ok((prods[..n].to_vec(), prods[n..].to_vec()))
}

/// `runs` independent standard Gaussian vectors of length `d`, run-major.
/// The caller provisions the dealer bits.
pub fn pi_gss_batch(p: &mut Party, runs: usize, d: usize) -> Result<Vec<u64>> {
    let pairs = gss_pairs(d);
    p.enter("gss");
    let out = (|| {
        let u = pi_gr_random(p, runs * pairs)?;
        let v = pi_gr_random(p, runs * pairs)?;
        let (a, b) = pi_box_muller(p, &u, &v)?;
        let mut s = Vec::with_capacity(runs * d);
        for run in 0..runs {
            let base = run * pairs;
            for i in 0..d {
                if d % 2 == 1 && i == d - 1 {
                    // first coordinate of the extra pair
                    s.push(a[base + pairs - 1]);
                } else if i % 2 == 0 {
                    s.push(a[base + i / 2]);
                } else {
                    s.push(b[base + i / 2]);
                }
            }
        }
        Ok(s)
    })();
    p.exit();
    out
}

pub fn pi_gss(p: &mut Party, d: usize) -> Result<Vec<u64>> {
    provisioned(p, |q| pi_gss_batch(q, 1, d))
}

/// `c * sum(-ln u_i)` over `d` fresh uniforms per run.
pub fn pi_gamma_batch(p: &mut Party, runs: usize, dp: &DpParams) -> Result<Vec<u64>> {
    let d = dp.d;
    let c = *p.cfg();
    let l = c.frac_bits;
    p.enter("gamma");
    let out = (|| {
        let u = pi_gr_random(p, runs * d)?;
        let e = ln_with(p, &u, l + 1)?;
        let sums: Vec<u64> = e
            .chunks(d.max(1))
            .take(runs)
            .map(|r| r.iter().fold(0u64, |acc, &x| c.sub(acc, x)))
            .collect();
        let sums = if d == 0 { vec![0; runs] } else { sums };
        // -ln u <= l ln 2 for every sample
        let bound = ((d.max(1) as f64) * (l as f64) * std::f64::consts::LN_2 + 1.0)
            .log2()
            .ceil() as u32;
        scale_by(
            p,
            &sums,
            dp.scale(),
            &ScaleSpec {
                in_frac: l,
                out_frac: l,
                bound_bits: bound,
            },
        )
    })();
    p.exit();
    out
}

pub fn pi_gamma_magnitude(p: &mut Party, dp: &DpParams) -> Result<u64> {
    Ok(provisioned(p, |q| pi_gamma_batch(q, 1, dp))?[0])
}

/// Draws noise for `runs` perturbations at once.
pub fn pi_noise_batch(p: &mut Party, runs: usize, dp: &DpParams) -> Result<Vec<NoiseVector>> {
    dp.validate()?;
    let d = dp.d;
    let mut out = Vec::with_capacity(runs);
    let mut done = 0;
    while done < runs {
        let k = DP_CHUNK_RUNS.min(runs - done);
        let (dir, eta, gamma) = provisioned(p, |q| {
            q.enter("dp");
            let r = (|| {
                let s = pi_gss_batch(q, k, d)?;
                let dir = pi_norm(q, &s, d)?;
                let gamma = pi_gamma_batch(q, k, dp)?;
                let g: Vec<u64> = gamma.iter().flat_map(|&g| std::iter::repeat_n(g, d)).collect();
                let eta = q.fx_mul(&dir, &g)?;
                Ok((dir, eta, gamma))
            })();
            q.exit();
            r
        })?;
        for j in 0..k {
            out.push(NoiseVector {
                direction: dir[j * d..(j + 1) * d].to_vec(),
                magnitude: gamma[j],
                eta: eta[j * d..(j + 1) * d].to_vec(),
            });
        }
        done += k;
    }
    Ok(out)
}

/// `w + eta` with fresh noise.
pub fn pi_dp(p: &mut Party, w: &[u64], dp: &DpParams) -> Result<Vec<u64>> {
    Ok(pi_dp_batch(p, w, 1, dp)?.remove(0))
}

/// `runs` independent perturbations of the same weights.
pub fn pi_dp_batch(p: &mut Party, w: &[u64], runs: usize, dp: &DpParams) -> Result<Vec<Vec<u64>>> {
    if w.len() != dp.d {
        return Err(Error::DimensionMismatch {
            expected: dp.d,
            got: w.len(),
        });
    }
    let noise = pi_noise_batch(p, runs, dp)?;
    Ok(noise.into_iter().map(|nv| p.add(w, &nv.eta)).collect())
}
