//! Correlated randomness issued by the trusted dealer.
//!
//! The dealer never sees inputs. It draws triples, truncation masks and
//! random bits from a single seeded stream and hands each computing party
//! its half. Consumption order at the parties is first-in first-out, so two
//! runs with the same seed and the same protocol sequence consume identical
//! material.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::mpc::share::{PartyId, SessionId, Share};

/// Shares of `(u, v, w)` with `w = u * v`. Single use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaverTriple {
    pub id: u64,
    pub u: Share,
    pub v: Share,
    pub w: Share,
}

/// Shares of a uniform mask `r` together with its arithmetic shift by
/// `shift` bits, its top bit and its low `shift` bits.
///
/// The extra bit shares let the parties truncate exactly rather than with a
/// one-ulp random carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationPair {
    pub shift: u32,
    pub r: Share,
    pub r_shifted: Share,
    pub msb: Share,
    pub low_bits: Vec<Share>,
}

/// Share of a uniform bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomBitShare {
    pub bit: Share,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaterialKind {
    Triple,
    TruncPair { shift: u32 },
    Bit,
}

/// Struct-of-arrays triples for one party.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleBatch {
    pub first_id: u64,
    pub u: Vec<u64>,
    pub v: Vec<u64>,
    pub w: Vec<u64>,
}

impl TripleBatch {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Struct-of-arrays truncation pairs for one party. `low_bits` is
/// item-major: bits of item `i` are `low_bits[i*shift .. (i+1)*shift]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruncBatch {
    pub shift: u32,
    pub r: Vec<u64>,
    pub r_shifted: Vec<u64>,
    pub msb: Vec<u64>,
    pub low_bits: Vec<u64>,
}

impl TruncBatch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// How much material a protocol step consumes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Requirements {
    pub triples: usize,
    pub bits: usize,
    pub trunc: BTreeMap<u32, usize>,
}

impl Requirements {
    pub fn is_empty(&self) -> bool {
        self.triples == 0 && self.bits == 0 && self.trunc.values().all(|&c| c == 0)
    }

    pub fn add(&mut self, other: &Requirements) {
        self.triples += other.triples;
        self.bits += other.bits;
        for (&m, &c) in &other.trunc {
            *self.trunc.entry(m).or_default() += c;
        }
    }

    pub fn scaled(&self, factor: usize) -> Requirements {
        Requirements {
            triples: self.triples * factor,
            bits: self.bits * factor,
            trunc: self.trunc.iter().map(|(&m, &c)| (m, c * factor)).collect(),
        }
    }

    /// Adds `percent` slack to every count, rounding up.
    pub fn with_slack(&self, percent: usize) -> Requirements {
        let up = |c: usize| c + (c * percent).div_ceil(100);
        Requirements {
            triples: up(self.triples),
            bits: up(self.bits),
            trunc: self.trunc.iter().map(|(&m, &c)| (m, up(c))).collect(),
        }
    }

    /// Removes what is already available.
    pub fn minus(&self, have: &Requirements) -> Requirements {
        Requirements {
            triples: self.triples.saturating_sub(have.triples),
            bits: self.bits.saturating_sub(have.bits),
            trunc: self
                .trunc
                .iter()
                .map(|(&m, &c)| (m, c.saturating_sub(*have.trunc.get(&m).unwrap_or(&0))))
                .filter(|&(_, c)| c > 0)
                .collect(),
        }
    }

    /// Total number of ring elements one party receives for these counts.
    pub fn ring_elements(&self) -> usize {
        3 * self.triples
            + self.bits
            + self
                .trunc
                .iter()
                .map(|(&m, &c)| c * (3 + m as usize))
                .sum::<usize>()
    }
}

/// One party's half of a provisioning response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Material {
    pub triples: TripleBatch,
    pub trunc: Vec<TruncBatch>,
    pub bits: Vec<u64>,
}

/// Seeded generator of correlated randomness.
pub struct Dealer {
    cfg: RingConfig,
    session: SessionId,
    rng: ChaCha12Rng,
    next_triple_id: u64,
}

impl Dealer {
    pub fn new(cfg: RingConfig, session: SessionId, seed: u64) -> Self {
        Dealer {
            cfg,
            session,
            rng: ChaCha12Rng::seed_from_u64(seed),
            next_triple_id: 0,
        }
    }

    pub fn config(&self) -> RingConfig {
        self.cfg
    }

    pub fn session(&self) -> SessionId {
        self.session
    }

    #[inline]
    fn rand(&mut self) -> u64 {
        self.cfg.wrap(self.rng.random::<u64>())
    }

    #[inline]
    fn split(&mut self, x: u64, out0: &mut Vec<u64>, out1: &mut Vec<u64>) {
        let a = self.rand();
        out0.push(a);
        out1.push(self.cfg.sub(x, a));
    }

    pub fn issue_triples(&mut self, count: usize) -> [TripleBatch; 2] {
        let mut b0 = TripleBatch {
            first_id: self.next_triple_id,
            ..Default::default()
        };
        let mut b1 = b0.clone();
        for b in [&mut b0, &mut b1] {
            b.u.reserve(count);
            b.v.reserve(count);
            b.w.reserve(count);
        }
        for _ in 0..count {
            let u = self.rand();
            let v = self.rand();
            let w = self.cfg.mul(u, v);
            self.split(u, &mut b0.u, &mut b1.u);
            self.split(v, &mut b0.v, &mut b1.v);
            self.split(w, &mut b0.w, &mut b1.w);
        }
        self.next_triple_id += count as u64;
        [b0, b1]
    }

    pub fn issue_trunc(&mut self, shift: u32, count: usize) -> Result<[TruncBatch; 2]> {
        if shift > self.cfg.lambda - 2 {
            return Err(Error::InvalidConfig(format!(
                "truncation by {shift} bits exceeds the ring headroom"
            )));
        }
        let mut b0 = TruncBatch {
            shift,
            ..Default::default()
        };
        let mut b1 = b0.clone();
        for _ in 0..count {
            let r = self.rand();
            let r_shifted = self.cfg.truncate(r, shift);
            let msb = r >> (self.cfg.lambda - 1);
            self.split(r, &mut b0.r, &mut b1.r);
            self.split(r_shifted, &mut b0.r_shifted, &mut b1.r_shifted);
            self.split(msb, &mut b0.msb, &mut b1.msb);
            for j in 0..shift {
                self.split((r >> j) & 1, &mut b0.low_bits, &mut b1.low_bits);
            }
        }
        Ok([b0, b1])
    }

    pub fn issue_bits(&mut self, count: usize) -> [Vec<u64>; 2] {
        let mut b0 = Vec::with_capacity(count);
        let mut b1 = Vec::with_capacity(count);
        for _ in 0..count {
            let bit = self.rng.random::<u64>() & 1;
            self.split(bit, &mut b0, &mut b1);
        }
        [b0, b1]
    }

    /// Issues everything in `req`, triples first, then truncation pairs by
    /// ascending shift, then bits.
    pub fn issue(&mut self, req: &Requirements) -> Result<[Material; 2]> {
        let [t0, t1] = self.issue_triples(req.triples);
        let mut m0 = Material {
            triples: t0,
            ..Default::default()
        };
        let mut m1 = Material {
            triples: t1,
            ..Default::default()
        };
        for (&shift, &count) in &req.trunc {
            if count == 0 {
                continue;
            }
            let [a, b] = self.issue_trunc(shift, count)?;
            m0.trunc.push(a);
            m1.trunc.push(b);
        }
        let [b0, b1] = self.issue_bits(req.bits);
        m0.bits = b0;
        m1.bits = b1;
        Ok([m0, m1])
    }

    /// Single-kind issuance returning per-party typed items.
    pub fn dealer_issue(&mut self, kind: MaterialKind, count: usize) -> Result<[Vec<Issued>; 2]> {
        let session = self.session;
        let mk = |party: PartyId, value: u64| Share {
            value,
            party,
            session,
        };
        let mut out: [Vec<Issued>; 2] = [Vec::new(), Vec::new()];
        match kind {
            MaterialKind::Triple => {
                let batches = self.issue_triples(count);
                for (p, b) in batches.iter().enumerate() {
                    let party = PartyId::new(p as u8)?;
                    for i in 0..b.len() {
                        out[p].push(Issued::Triple(BeaverTriple {
                            id: b.first_id + i as u64,
                            u: mk(party, b.u[i]),
                            v: mk(party, b.v[i]),
                            w: mk(party, b.w[i]),
                        }));
                    }
                }
            }
            MaterialKind::TruncPair { shift } => {
                let batches = self.issue_trunc(shift, count)?;
                for (p, b) in batches.iter().enumerate() {
                    let party = PartyId::new(p as u8)?;
                    let m = shift as usize;
                    for i in 0..b.len() {
                        out[p].push(Issued::Trunc(TruncationPair {
                            shift,
                            r: mk(party, b.r[i]),
                            r_shifted: mk(party, b.r_shifted[i]),
                            msb: mk(party, b.msb[i]),
                            low_bits: b.low_bits[i * m..(i + 1) * m]
                                .iter()
                                .map(|&x| mk(party, x))
                                .collect(),
                        }));
                    }
                }
            }
            MaterialKind::Bit => {
                let batches = self.issue_bits(count);
                for (p, b) in batches.iter().enumerate() {
                    let party = PartyId::new(p as u8)?;
                    out[p].extend(b.iter().map(|&x| Issued::Bit(RandomBitShare { bit: mk(party, x) })));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issued {
    Triple(BeaverTriple),
    Trunc(TruncationPair),
    Bit(RandomBitShare),
}

/// Party-side FIFO of provisioned material.
#[derive(Debug, Default)]
pub struct MaterialStore {
    triples: TripleQueue,
    trunc: BTreeMap<u32, TruncQueue>,
    bits: Queue,
}

#[derive(Debug, Default)]
struct Queue {
    data: Vec<u64>,
    head: usize,
}

impl Queue {
    fn available(&self) -> usize {
        self.data.len() - self.head
    }

    fn push(&mut self, mut items: Vec<u64>) {
        if self.head > 0 {
            self.data.drain(..self.head);
            self.head = 0;
        }
        if self.data.is_empty() {
            self.data = std::mem::take(&mut items);
        } else {
            self.data.append(&mut items);
        }
    }

    fn take(&mut self, n: usize) -> Vec<u64> {
        let out = self.data[self.head..self.head + n].to_vec();
        self.head += n;
        out
    }
}

#[derive(Debug, Default)]
struct TripleQueue {
    u: Queue,
    v: Queue,
    w: Queue,
}

#[derive(Debug, Default)]
struct TruncQueue {
    r: Queue,
    r_shifted: Queue,
    msb: Queue,
    low_bits: Queue,
}

impl MaterialStore {
    pub fn push(&mut self, m: Material) {
        self.triples.u.push(m.triples.u);
        self.triples.v.push(m.triples.v);
        self.triples.w.push(m.triples.w);
        for b in m.trunc {
            let q = self.trunc.entry(b.shift).or_default();
            q.r.push(b.r);
            q.r_shifted.push(b.r_shifted);
            q.msb.push(b.msb);
            q.low_bits.push(b.low_bits);
        }
        self.bits.push(m.bits);
    }

    pub fn available(&self) -> Requirements {
        Requirements {
            triples: self.triples.u.available(),
            bits: self.bits.available(),
            trunc: self
                .trunc
                .iter()
                .map(|(&m, q)| (m, q.r.available()))
                .collect(),
        }
    }

    pub fn take_triples(&mut self, n: usize) -> Result<TripleBatch> {
        let available = self.triples.u.available();
        if available < n {
            return Err(Error::Exhausted {
                kind: "triples",
                needed: n,
                available,
            });
        }
        Ok(TripleBatch {
            first_id: 0,
            u: self.triples.u.take(n),
            v: self.triples.v.take(n),
            w: self.triples.w.take(n),
        })
    }

    pub fn take_trunc(&mut self, shift: u32, n: usize) -> Result<TruncBatch> {
        let available = self.trunc.get(&shift).map_or(0, |q| q.r.available());
        if available < n {
            return Err(Error::Exhausted {
                kind: "truncation pairs",
                needed: n,
                available,
            });
        }
        let q = self.trunc.get_mut(&shift).expect("checked above");
        Ok(TruncBatch {
            shift,
            r: q.r.take(n),
            r_shifted: q.r_shifted.take(n),
            msb: q.msb.take(n),
            low_bits: q.low_bits.take(n * shift as usize),
        })
    }

    pub fn take_bits(&mut self, n: usize) -> Result<Vec<u64>> {
        let available = self.bits.available();
        if available < n {
            return Err(Error::Exhausted {
                kind: "random bits",
                needed: n,
                available,
            });
        }
        Ok(self.bits.take(n))
    }
}
