//! One computing party's view of a session: the peer link, the dealer link,
//! the material queue and the transcript.
//!
//! Every method that communicates is collective: both parties must call it
//! in the same order with vectors of the same length. Shares are plain
//! `u64` slices owned by the caller; the party id decides who applies
//! public offsets.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::mpc::dealer::{BeaverTriple, Material, MaterialStore, Requirements, TripleBatch, TruncBatch};
use crate::mpc::provision::{request_material, send_close};
use crate::mpc::share::{PartyId, SessionId, Share};
use crate::mpc::transcript::Transcript;
use crate::mpc::transport::{Link, NullLink};
use crate::mpc::wire::{Frame, KIND_OPEN};

/// Slack added on top of dry-run counts when provisioning.
pub const DEFAULT_SLACK_PERCENT: usize = 10;

enum Source {
    Store(MaterialStore),
    Counting(Requirements),
}

pub struct Party {
    cfg: RingConfig,
    id: PartyId,
    session: SessionId,
    peer: Box<dyn Link>,
    dealer: Option<Box<dyn Link>>,
    round: u32,
    source: Source,
    transcript: Transcript,
    used_triples: HashSet<u64>,
    slack_percent: usize,
}

impl Party {
    pub fn new(
        cfg: RingConfig,
        id: PartyId,
        session: SessionId,
        peer: Box<dyn Link>,
        dealer: Option<Box<dyn Link>>,
    ) -> Party {
        Party {
            cfg,
            id,
            session,
            peer,
            dealer,
            round: 0,
            source: Source::Store(MaterialStore::default()),
            transcript: Transcript::default(),
            used_triples: HashSet::new(),
            slack_percent: DEFAULT_SLACK_PERCENT,
        }
    }

    /// A party with no peer and no dealer that only tallies the material a
    /// protocol consumes. Values it computes are meaningless.
    pub fn counting(cfg: RingConfig, id: PartyId, session: SessionId) -> Party {
        Party {
            source: Source::Counting(Requirements::default()),
            ..Party::new(cfg, id, session, Box::new(NullLink::default()), None)
        }
    }

    pub fn cfg(&self) -> &RingConfig {
        &self.cfg
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn session(&self) -> SessionId {
        self.session
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_counting(&self) -> bool {
        matches!(self.source, Source::Counting(_))
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn take_transcript(&mut self) -> Transcript {
        std::mem::take(&mut self.transcript)
    }

    pub fn set_slack_percent(&mut self, percent: usize) {
        self.slack_percent = percent;
    }

    /// Material consumed so far in counting mode.
    pub fn counted(&self) -> Option<&Requirements> {
        match &self.source {
            Source::Counting(r) => Some(r),
            Source::Store(_) => None,
        }
    }

    pub fn available(&self) -> Requirements {
        match &self.source {
            Source::Store(s) => s.available(),
            Source::Counting(_) => Requirements::default(),
        }
    }

    pub fn push_material(&mut self, m: Material) {
        if let Source::Store(s) = &mut self.source {
            s.push(m);
        }
    }

    /// Fetches whatever part of `need` is not already queued, plus slack.
    pub fn provision(&mut self, need: &Requirements) -> Result<()> {
        let Source::Store(store) = &mut self.source else {
            return Ok(());
        };
        let missing = need.minus(&store.available());
        if missing.is_empty() {
            return Ok(());
        }
        let req = missing.with_slack(self.slack_percent);
        let dealer = self.dealer.as_mut().ok_or(Error::Exhausted {
            kind: "dealer material (no dealer attached)",
            needed: missing.ring_elements(),
            available: 0,
        })?;
        let m = request_material(dealer.as_mut(), self.session, &req)?;
        store.push(m);
        Ok(())
    }

    /// Dry-runs `f` on a counting party and provisions what it consumed.
    pub fn provision_for<F>(&mut self, f: F) -> Result<Requirements>
    where
        F: FnOnce(&mut Party) -> Result<()>,
    {
        let mut dry = Party::counting(self.cfg, self.id, self.session);
        f(&mut dry)?;
        let need = dry.counted().cloned().unwrap_or_default();
        self.provision(&need)?;
        Ok(need)
    }

    /// Tells the dealer this party is done.
    pub fn close(&mut self) -> Result<()> {
        if let Some(d) = self.dealer.as_mut() {
            send_close(d.as_mut(), self.session)?;
        }
        Ok(())
    }

    pub fn enter(&mut self, label: &str) {
        self.transcript.enter(label);
    }

    pub fn exit(&mut self) {
        self.transcript.exit();
    }

    /// Runs `f` with transcript entries attributed to `label`.
    pub fn scoped<T>(&mut self, label: &str, f: impl FnOnce(&mut Party) -> Result<T>) -> Result<T> {
        self.enter(label);
        let out = f(self);
        self.exit();
        out
    }

    // ----- material -----

    fn take_triples(&mut self, n: usize) -> Result<TripleBatch> {
        self.transcript.note_triples(n);
        match &mut self.source {
            Source::Store(s) => s.take_triples(n),
            Source::Counting(r) => {
                r.triples += n;
                Ok(TripleBatch {
                    first_id: 0,
                    u: vec![0; n],
                    v: vec![0; n],
                    w: vec![0; n],
                })
            }
        }
    }

    fn take_trunc(&mut self, shift: u32, n: usize) -> Result<TruncBatch> {
        match &mut self.source {
            Source::Store(s) => s.take_trunc(shift, n),
            Source::Counting(r) => {
                *r.trunc.entry(shift).or_default() += n;
                Ok(TruncBatch {
                    shift,
                    r: vec![0; n],
                    r_shifted: vec![0; n],
                    msb: vec![0; n],
                    low_bits: vec![0; n * shift as usize],
                })
            }
        }
    }

    pub fn take_bits(&mut self, n: usize) -> Result<Vec<u64>> {
        match &mut self.source {
            Source::Store(s) => s.take_bits(n),
            Source::Counting(r) => {
                r.bits += n;
                Ok(vec![0; n])
            }
        }
    }

    // ----- local helpers -----

    /// Public value as this party's share: party 0 holds it, party 1 holds 0.
    pub fn share_public(&self, xs: &[u64]) -> Vec<u64> {
        let d = self.id.delta();
        xs.iter().map(|&x| self.cfg.mul(d, x)).collect()
    }

    #[inline]
    pub fn public(&self, c: u64) -> u64 {
        self.cfg.mul(self.id.delta(), c)
    }

    pub fn add(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        x.iter().zip(y).map(|(&a, &b)| self.cfg.add(a, b)).collect()
    }

    pub fn sub(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        x.iter().zip(y).map(|(&a, &b)| self.cfg.sub(a, b)).collect()
    }

    pub fn add_public(&self, x: &[u64], c: u64) -> Vec<u64> {
        let c = self.public(c);
        x.iter().map(|&a| self.cfg.add(a, c)).collect()
    }

    /// `c - x` for public `c`.
    pub fn rsub_public(&self, c: u64, x: &[u64]) -> Vec<u64> {
        let c = self.public(c);
        x.iter().map(|&a| self.cfg.sub(c, a)).collect()
    }

    pub fn scale(&self, x: &[u64], c: u64) -> Vec<u64> {
        x.iter().map(|&a| self.cfg.mul(a, c)).collect()
    }

    pub fn neg(&self, x: &[u64]) -> Vec<u64> {
        x.iter().map(|&a| self.cfg.neg(a)).collect()
    }

    // ----- communication -----

    /// Opens `xs`: sends this party's shares, receives the peer's, returns
    /// the reconstructed values. One round.
    pub fn open(&mut self, xs: &[u64]) -> Result<Vec<u64>> {
        let start = std::time::Instant::now();
        let frame = Frame::with_round(KIND_OPEN, self.session, self.round, xs.to_vec());
        let sent = frame.wire_len();
        self.peer.send(&frame)?;
        let got = self.peer.recv()?;
        if got.kind != KIND_OPEN {
            return Err(Error::Frame(format!("expected an opening, got kind {:#04x}", got.kind)));
        }
        if got.session != self.session {
            return Err(Error::SessionMismatch(self.session, got.session));
        }
        let received = got.round.unwrap_or(u32::MAX);
        if received != self.round {
            return Err(Error::RoundDesync {
                expected: self.round,
                received,
            });
        }
        if got.payload.len() != xs.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: got.payload.len(),
            });
        }
        let recv_len = got.wire_len();
        let out: Vec<u64> = xs
            .iter()
            .zip(&got.payload)
            .map(|(&a, &b)| self.cfg.add(a, b))
            .collect();
        self.transcript
            .note_round(self.round, sent, recv_len, xs.len(), start.elapsed());
        self.round += 1;
        Ok(out)
    }

    /// Element-wise ring product with Beaver triples. One round.
    pub fn mul(&mut self, x: &[u64], y: &[u64]) -> Result<Vec<u64>> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let n = x.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let t = self.take_triples(n)?;
        let c = self.cfg;
        let mut masked = Vec::with_capacity(2 * n);
        masked.extend(x.iter().zip(&t.u).map(|(&a, &u)| c.sub(a, u)));
        masked.extend(y.iter().zip(&t.v).map(|(&b, &v)| c.sub(b, v)));
        let opened = self.open(&masked)?;
        let (d, e) = opened.split_at(n);
        let delta = self.id.delta();
        Ok((0..n)
            .map(|i| {
                let z = c.add(t.w[i], c.mul(d[i], t.v[i]));
                let z = c.add(z, c.mul(e[i], t.u[i]));
                c.add(z, c.mul(delta, c.mul(d[i], e[i])))
            })
            .collect())
    }

    /// Products of several independent pairs of vectors in a single round.
    pub fn mul_many(&mut self, pairs: &[(&[u64], &[u64])]) -> Result<Vec<Vec<u64>>> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, y) in pairs {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    got: y.len(),
                });
            }
            xs.extend_from_slice(x);
            ys.extend_from_slice(y);
        }
        let z = self.mul(&xs, &ys)?;
        let mut out = Vec::with_capacity(pairs.len());
        let mut at = 0;
        for (x, _) in pairs {
            out.push(z[at..at + x.len()].to_vec());
            at += x.len();
        }
        Ok(out)
    }

    /// Single multiplication with an explicitly supplied triple.
    pub fn beaver_mul(&mut self, x: Share, y: Share, t: &BeaverTriple) -> Result<Share> {
        if !self.used_triples.insert(t.id) {
            return Err(Error::TripleReuse(t.id));
        }
        for s in [&x, &y, &t.u, &t.v, &t.w] {
            if s.session != self.session {
                return Err(Error::SessionMismatch(self.session, s.session));
            }
        }
        let c = self.cfg;
        let opened = self.open(&[c.sub(x.value, t.u.value), c.sub(y.value, t.v.value)])?;
        let (d, e) = (opened[0], opened[1]);
        let z = c.add(t.w.value, c.mul(d, t.v.value));
        let z = c.add(z, c.mul(e, t.u.value));
        let z = c.add(z, c.mul(self.id.delta(), c.mul(d, e)));
        Ok(Share {
            value: z,
            party: self.id,
            session: self.session,
        })
    }

    /// Exact arithmetic right shift by `m` bits: reconstructs to
    /// `floor(x / 2^m)` for every `|x| < 2^(lambda-2)`.
    pub fn trunc(&mut self, x: &[u64], m: u32) -> Result<Vec<u64>> {
        let n = x.len();
        if n == 0 || m == 0 {
            return Ok(x.to_vec());
        }
        let c = self.cfg;
        let lam = c.lambda;
        if m > lam - 2 {
            return Err(Error::InvalidConfig(format!("cannot truncate by {m} bits")));
        }
        let t = self.take_trunc(m, n)?;
        let offset = 1u64 << (lam - 2);
        let masked: Vec<u64> = (0..n)
            .map(|i| c.add(c.add(x[i], self.public(offset)), t.r[i]))
            .collect();
        let opened = self.open(&masked)?;
        let mw = m as usize;
        let low_mask = (1u64 << m) - 1;
        let c_low: Vec<u64> = opened.iter().map(|&v| v & low_mask).collect();
        let borrow = self.bit_lt_public(&c_low, &t.low_bits, mw)?;
        let top = 1u64 << (lam - 1 - m);
        let shift_back = 1u64 << (lam - 2 - m);
        let half_mask = (1u64 << (lam - 1)) - 1;
        Ok((0..n)
            .map(|i| {
                let cv = opened[i];
                let c_msb = cv >> (lam - 1);
                let c_mid = (cv & half_mask) >> m;
                // b = c_msb xor r_msb, linear because c_msb is public
                let b = if c_msb == 1 {
                    c.sub(self.public(1), t.msb[i])
                } else {
                    t.msb[i]
                };
                let r_mid = c.add(t.r_shifted[i], c.mul(top, t.msb[i]));
                let mut y = c.sub(self.public(c_mid), r_mid);
                y = c.add(y, c.mul(top, b));
                y = c.sub(y, borrow[i]);
                c.sub(y, self.public(shift_back))
            })
            .collect())
    }

    /// Fixed-point product: ring product followed by an exact shift by `l`.
    pub fn fx_mul(&mut self, x: &[u64], y: &[u64]) -> Result<Vec<u64>> {
        let z = self.mul(x, y)?;
        self.trunc(&z, self.cfg.frac_bits)
    }

    /// Shares of `[c < r]` where `c` is public and `r` is given by shared
    /// bits, `m` bits per item, item-major, least significant first.
    pub fn bit_lt_public(&mut self, c: &[u64], r_bits: &[u64], m: usize) -> Result<Vec<u64>> {
        let n = c.len();
        let cf = self.cfg;
        let one = self.public(1);
        let mut g = Vec::with_capacity(n * m);
        let mut p = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                let r = r_bits[i * m + j];
                if (c[i] >> j) & 1 == 1 {
                    g.push(0);
                    p.push(r);
                } else {
                    g.push(r);
                    p.push(cf.sub(one, r));
                }
            }
        }
        let mut width = m;
        while width > 1 {
            let half = width / 2;
            let next = width.div_ceil(2);
            let need_p = next > 1;
            // gather operands for every pair (lo = 2t, hi = 2t + 1)
            let mut ph = Vec::with_capacity(n * half);
            let mut gl = Vec::with_capacity(n * half);
            let mut pl = Vec::with_capacity(n * half);
            for i in 0..n {
                for t in 0..half {
                    ph.push(p[i * width + 2 * t + 1]);
                    gl.push(g[i * width + 2 * t]);
                    pl.push(p[i * width + 2 * t]);
                }
            }
            let prods = if need_p {
                self.mul_many(&[(&ph, &gl), (&ph, &pl)])?
            } else {
                vec![self.mul(&ph, &gl)?]
            };
            let mut g2 = Vec::with_capacity(n * next);
            let mut p2 = Vec::with_capacity(n * next);
            for i in 0..n {
                for t in 0..half {
                    let k = i * half + t;
                    g2.push(cf.add(g[i * width + 2 * t + 1], prods[0][k]));
                    if need_p {
                        p2.push(prods[1][k]);
                    }
                }
                if width % 2 == 1 {
                    g2.push(g[i * width + width - 1]);
                    if need_p {
                        p2.push(p[i * width + width - 1]);
                    }
                }
            }
            g = g2;
            p = p2;
            width = next;
        }
        Ok(g)
    }

    /// Shares of `[x < 0]` for `|x| < 2^(k-1)`.
    pub fn ltz(&mut self, x: &[u64], k: u32) -> Result<Vec<u64>> {
        let t = self.trunc(x, k - 1)?;
        Ok(self.neg(&t))
    }

    /// Bits of `a` for `0 <= a < 2^k`, item-major, least significant first.
    pub fn decompose(&mut self, a: &[u64], k: u32) -> Result<Vec<u64>> {
        let n = a.len();
        let kw = k as usize;
        let cf = self.cfg;
        let t = self.take_trunc(k, n)?;
        let masked: Vec<u64> = (0..n).map(|i| cf.add(a[i], t.r[i])).collect();
        let opened = self.open(&masked)?;
        let one = self.public(1);

        // borrow into bit j is [c mod 2^j < r mod 2^j]: prefix over bits 0..j
        let mut g = Vec::with_capacity(n * kw);
        let mut p = Vec::with_capacity(n * kw);
        for i in 0..n {
            for j in 0..kw {
                let r = t.low_bits[i * kw + j];
                if (opened[i] >> j) & 1 == 1 {
                    g.push(0);
                    p.push(r);
                } else {
                    g.push(r);
                    p.push(cf.sub(one, r));
                }
            }
        }
        self.prefix_lt(&mut g, &mut p, n, kw)?;
        // t_j = r_j xor borrow_j, borrow_0 = 0
        let mut rb = Vec::with_capacity(n * kw);
        let mut br = Vec::with_capacity(n * kw);
        for i in 0..n {
            for j in 1..kw {
                rb.push(t.low_bits[i * kw + j]);
                br.push(g[i * kw + j - 1]);
            }
        }
        let prod = self.mul(&rb, &br)?;
        let mut bits = Vec::with_capacity(n * kw);
        for i in 0..n {
            for j in 0..kw {
                let x = if j == 0 {
                    t.low_bits[i * kw]
                } else {
                    let k = i * (kw - 1) + j - 1;
                    cf.sub(cf.add(rb[k], br[k]), cf.mul(2, prod[k]))
                };
                let bit = if (opened[i] >> j) & 1 == 1 {
                    cf.sub(one, x)
                } else {
                    x
                };
                bits.push(bit);
            }
        }
        Ok(bits)
    }

    /// In-place Sklansky prefix of the (g, p) borrow operator over each
    /// item's `k` positions, least significant first. Afterwards `g[j]`
    /// covers positions `0..=j`.
    fn prefix_lt(&mut self, g: &mut [u64], p: &mut [u64], n: usize, k: usize) -> Result<()> {
        let cf = self.cfg;
        let mut s = 0;
        while (1usize << s) < k {
            let last = (1usize << (s + 1)) >= k;
            let mut idx = Vec::new();
            for j in 0..k {
                if (j >> s) & 1 == 1 {
                    idx.push((j, ((j >> s) << s) - 1));
                }
            }
            let mut ph = Vec::with_capacity(n * idx.len());
            let mut gl = Vec::with_capacity(n * idx.len());
            let mut pl = Vec::with_capacity(n * idx.len());
            for i in 0..n {
                for &(hi, lo) in &idx {
                    ph.push(p[i * k + hi]);
                    gl.push(g[i * k + lo]);
                    pl.push(p[i * k + lo]);
                }
            }
            let prods = if last {
                vec![self.mul(&ph, &gl)?]
            } else {
                self.mul_many(&[(&ph, &gl), (&ph, &pl)])?
            };
            for i in 0..n {
                for (t, &(hi, _)) in idx.iter().enumerate() {
                    let q = i * idx.len() + t;
                    g[i * k + hi] = cf.add(g[i * k + hi], prods[0][q]);
                    if !last {
                        p[i * k + hi] = prods[1][q];
                    }
                }
            }
            s += 1;
        }
        Ok(())
    }

    /// In-place Sklansky prefix-OR from the most significant position down:
    /// afterwards `b[j]` is the OR of positions `j..k`.
    fn suffix_or(&mut self, b: &mut [u64], n: usize, k: usize) -> Result<()> {
        let cf = self.cfg;
        let mut s = 0;
        while (1usize << s) < k {
            // index from the top: position q = k - 1 - j
            let mut idx = Vec::new();
            for q in 0..k {
                if (q >> s) & 1 == 1 {
                    let lo = ((q >> s) << s) - 1;
                    idx.push((k - 1 - q, k - 1 - lo));
                }
            }
            let mut xs = Vec::with_capacity(n * idx.len());
            let mut ys = Vec::with_capacity(n * idx.len());
            for i in 0..n {
                for &(a, b2) in &idx {
                    xs.push(b[i * k + a]);
                    ys.push(b[i * k + b2]);
                }
            }
            let prod = self.mul(&xs, &ys)?;
            for i in 0..n {
                for (t, &(a, _)) in idx.iter().enumerate() {
                    let q = i * idx.len() + t;
                    b[i * k + a] = cf.sub(cf.add(xs[q], ys[q]), prod[q]);
                }
            }
            s += 1;
        }
        Ok(())
    }

    /// One-hot encoding of the most significant set bit of `a`, for
    /// `0 <= a < 2^k`: `h[i*k + j] = 1` iff `2^j <= a < 2^(j+1)`. All zero
    /// when `a = 0`.
    pub fn one_hot_msb(&mut self, a: &[u64], k: u32) -> Result<Vec<u64>> {
        let n = a.len();
        let kw = k as usize;
        let mut o = self.decompose(a, k)?;
        self.suffix_or(&mut o, n, kw)?;
        let cf = self.cfg;
        let mut h = Vec::with_capacity(n * kw);
        for i in 0..n {
            for j in 0..kw {
                let above = if j + 1 < kw { o[i * kw + j + 1] } else { 0 };
                h.push(cf.sub(o[i * kw + j], above));
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::sim::{run_pair, share_for, try_run_pair};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> RingConfig {
        RingConfig::default()
    }

    fn rp<T: Send, F: Fn(&mut Party) -> Result<T> + Sync>(c: RingConfig, f: F) -> [T; 2] {
        run_pair(c, 1, f).unwrap()
    }

    #[test]
    fn beaver_example_from_hand_expansion() {
        // x=3, y=4 with triple u=5, v=6, w=30: d = e = -2, result 12
        let c = cfg();
        let out = rp(c, |p| {
            let me = p.id();
            let sh = |v: u64| Share {
                value: if me == PartyId::P0 { v } else { 0 },
                party: me,
                session: 1,
            };
            let t = BeaverTriple {
                id: 0,
                u: sh(5),
                v: sh(6),
                w: sh(30),
            };
            let z = p.beaver_mul(sh(3), sh(4), &t)?;
            let again = p.beaver_mul(sh(3), sh(4), &t);
            assert!(matches!(again, Err(Error::TripleReuse(0))));
            Ok(vec![z.value])
        });
        assert_eq!(c.add(out[0][0], out[1][0]), 12);
    }

    #[test]
    fn mul_matches_modular_product() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<u64> = (0..2000).map(|_| rng.random()).collect();
        let y: Vec<u64> = (0..2000).map(|_| rng.random()).collect();
        let (x0, x1) = share_for(&c, &x, 9);
        let (y0, y1) = share_for(&c, &y, 10);
        let ins = [(x0, y0), (x1, y1)];
        let out = rp(c, move |p| {
            let (a, b) = &ins[p.id().index()];
            p.provision_for(|d| d.mul(a, b).map(|_| ()))?;
            p.mul(a, b)
        });
        for i in 0..x.len() {
            assert_eq!(c.add(out[0][i], out[1][i]), c.mul(x[i], y[i]));
        }
    }

    #[test]
    fn trunc_is_exact_floor() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bound = 1i64 << 61;
        let mut xs: Vec<i64> = (0..3000).map(|_| rng.random_range(-bound..bound)).collect();
        xs.extend([0, -1, 1, bound - 1, -bound, 1 << 20, -(1 << 20)]);
        let raw: Vec<u64> = xs.iter().map(|&v| c.from_signed(v)).collect();
        let (s0, s1) = share_for(&c, &raw, 11);
        let ins = [s0, s1];
        for m in [1u32, 7, 20, 40, 62] {
            let ins = ins.clone();
            let out = rp(c, move |p| {
                let a = &ins[p.id().index()];
                p.provision_for(|d| d.trunc(a, m).map(|_| ()))?;
                p.trunc(a, m)
            });
            for i in 0..xs.len() {
                let got = c.to_signed(c.add(out[0][i], out[1][i]));
                assert_eq!(got, xs[i] >> m, "x={} m={m}", xs[i]);
            }
        }
    }

    #[test]
    fn fixed_point_product() {
        let c = cfg();
        let x = c.encode(1.5).unwrap();
        let y = c.encode(2.0).unwrap();
        let (x0, x1) = share_for(&c, &[x], 1);
        let (y0, y1) = share_for(&c, &[y], 2);
        let ins = [(x0, y0), (x1, y1)];
        let out = rp(c, move |p| {
            let (a, b) = &ins[p.id().index()];
            p.provision_for(|d| d.fx_mul(a, b).map(|_| ()))?;
            p.fx_mul(a, b)
        });
        assert_eq!(c.decode(c.add(out[0][0], out[1][0])), 3.0);
    }

    #[test]
    fn ltz_decompose_and_one_hot() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = 43u32;
        let mut vals: Vec<u64> = (0..500).map(|_| rng.random_range(0..1u64 << k)).collect();
        vals.extend([0, 1, 2, 3, (1 << k) - 1, 1 << (k - 1)]);
        let signed: Vec<u64> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| if i % 2 == 0 { c.neg(v) } else { v })
            .collect();
        let (a0, a1) = share_for(&c, &vals, 3);
        let (s0, s1) = share_for(&c, &signed, 4);
        let ins = [(a0, s0), (a1, s1)];
        let out = rp(c, move |p| {
            let (a, s) = &ins[p.id().index()];
            let body = |p: &mut Party| -> Result<Vec<u64>> {
                let mut v = p.decompose(a, k)?;
                v.extend(p.one_hot_msb(a, k)?);
                v.extend(p.ltz(s, k + 1)?);
                Ok(v)
            };
            p.provision_for(|d| body(d).map(|_| ()))?;
            body(p)
        });
        let r: Vec<u64> = out[0].iter().zip(&out[1]).map(|(&a, &b)| c.add(a, b)).collect();
        let n = vals.len();
        let kw = k as usize;
        for i in 0..n {
            for j in 0..kw {
                assert_eq!(r[i * kw + j], (vals[i] >> j) & 1, "bit {j} of {}", vals[i]);
                let hot = vals[i] != 0 && 63 - vals[i].leading_zeros() as usize == j;
                assert_eq!(r[n * kw + i * kw + j], hot as u64);
            }
            let neg = i % 2 == 0 && vals[i] != 0;
            assert_eq!(r[2 * n * kw + i], neg as u64, "ltz of {}", c.to_signed(signed[i]));
        }
    }

    #[test]
    fn round_desync_is_detected() {
        let c = cfg();
        let out = try_run_pair(c, 1, |p| {
            if p.id() == PartyId::P1 {
                p.round = 5;
            }
            p.open(&[1])
        });
        assert!(out.iter().any(|r| matches!(r, Err(Error::RoundDesync { .. }))));
    }

    #[test]
    fn counting_matches_consumption() {
        let c = cfg();
        let mut p = Party::counting(c, PartyId::P0, 1);
        p.fx_mul(&[1, 2, 3], &[4, 5, 6]).unwrap();
        let r = p.counted().unwrap();
        // one product plus 37 for a 20-bit comparison tree, per element
        assert_eq!(r.triples, 3 * (1 + 37));
        assert_eq!(r.trunc[&20], 3);
    }
}
