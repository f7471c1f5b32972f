//! Fixed-point encoding, additive sharing and a Beaver multiplication
//! between two in-process parties.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use veiltrain::mpc::sim::{reveal, run_pair, share_for};
use veiltrain::mpc::{reconstruct, share};
use veiltrain::{RingConfig, Result};

fn main() -> Result<()> {
    let c = RingConfig::default();
    let x = c.encode(-3.25)?;
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let (a, b) = share(&c, x, 1, &mut rng);
    println!("-3.25 encodes to {x:#018x}");
    println!("shares {:#018x} + {:#018x} -> {}", a.value, b.value, c.decode(reconstruct(&c, &a, &b)?));

    let xs = c.encode_vec(&[1.5, -2.0, 100.25])?;
    let ys = c.encode_vec(&[4.0, 0.125, -0.5])?;
    let (x0, x1) = share_for(&c, &xs, 2);
    let (y0, y1) = share_for(&c, &ys, 3);
    let [(p0, rounds), (p1, _)] = run_pair(c, 4, |p| {
        let (x, y) = if p.id().index() == 0 { (&x0, &y0) } else { (&x1, &y1) };
        p.provision_for(|d| d.fx_mul(x, y).map(|_| ()))?;
        let z = p.fx_mul(x, y)?;
        Ok((z, p.transcript().total().rounds))
    })?;
    println!("products {:?} in {rounds} rounds", c.decode_vec(&reveal(&c, &p0, &p1)));
    Ok(())
}
