//! Additive 2-out-of-2 sharing over `Z_{2^lambda}`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fixed::{RingConfig, RingElement};

/// Computing party index, 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartyId(u8);

impl PartyId {
    pub const P0: PartyId = PartyId(0);
    pub const P1: PartyId = PartyId(1);

    pub fn new(id: u8) -> Result<Self> {
        match id {
            0 | 1 => Ok(PartyId(id)),
            _ => Err(Error::InvalidConfig(format!("party id must be 0 or 1, got {id}"))),
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_u8(self) -> u8 {
        self.0
    }

    pub fn other(self) -> PartyId {
        PartyId(1 - self.0)
    }

    /// 1 for party 0, 0 for party 1. Public constants are added by party 0 only.
    #[inline]
    pub fn delta(self) -> u64 {
        (self.0 == 0) as u64
    }
}

pub type SessionId = u32;

/// One party's additive share of a single secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    pub value: RingElement,
    pub party: PartyId,
    pub session: SessionId,
}

/// One party's shares of a vector of secrets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareVec {
    pub party: PartyId,
    pub session: SessionId,
    pub values: Vec<RingElement>,
}

impl ShareVec {
    pub fn new(party: PartyId, session: SessionId, values: Vec<RingElement>) -> Self {
        ShareVec {
            party,
            session,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Share {
        Share {
            value: self.values[i],
            party: self.party,
            session: self.session,
        }
    }

    pub fn from_shares(shares: &[Share]) -> Result<Self> {
        let first = shares
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty share list".into()))?;
        for s in shares {
            if s.session != first.session {
                return Err(Error::SessionMismatch(first.session, s.session));
            }
            if s.party != first.party {
                return Err(Error::InvalidConfig(
                    "share vector mixes parties".into(),
                ));
            }
        }
        Ok(ShareVec::new(
            first.party,
            first.session,
            shares.iter().map(|s| s.value).collect(),
        ))
    }

    pub fn iter(&self) -> impl Iterator<Item = Share> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// Splits `x` into two uniformly random shares summing to `x`.
pub fn share<R: Rng + ?Sized>(
    cfg: &RingConfig,
    x: RingElement,
    session: SessionId,
    rng: &mut R,
) -> (Share, Share) {
    let x0 = cfg.wrap(rng.random::<u64>());
    let x1 = cfg.sub(x, x0);
    (
        Share {
            value: x0,
            party: PartyId::P0,
            session,
        },
        Share {
            value: x1,
            party: PartyId::P1,
            session,
        },
    )
}

pub fn share_vec<R: Rng + ?Sized>(
    cfg: &RingConfig,
    xs: &[RingElement],
    session: SessionId,
    rng: &mut R,
) -> (ShareVec, ShareVec) {
    let mut v0 = Vec::with_capacity(xs.len());
    let mut v1 = Vec::with_capacity(xs.len());
    for &x in xs {
        let r = cfg.wrap(rng.random::<u64>());
        v0.push(r);
        v1.push(cfg.sub(x, r));
    }
    (
        ShareVec::new(PartyId::P0, session, v0),
        ShareVec::new(PartyId::P1, session, v1),
    )
}

fn check_pair(a: (PartyId, SessionId), b: (PartyId, SessionId)) -> Result<()> {
    if a.1 != b.1 {
        return Err(Error::SessionMismatch(a.1, b.1));
    }
    if a.0 == b.0 {
        return Err(Error::PartyMismatch(a.0.as_u8()));
    }
    Ok(())
}

pub fn reconstruct(cfg: &RingConfig, s0: &Share, s1: &Share) -> Result<RingElement> {
    check_pair((s0.party, s0.session), (s1.party, s1.session))?;
    Ok(cfg.add(s0.value, s1.value))
}

pub fn reconstruct_vec(cfg: &RingConfig, a: &ShareVec, b: &ShareVec) -> Result<Vec<RingElement>> {
    check_pair((a.party, a.session), (b.party, b.session))?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| cfg.add(x, y))
        .collect())
}

/// `sum c_i * s_i + offset`, with the offset applied by party 0 only.
///
/// Purely local: no communication.
pub fn local_linear(
    cfg: &RingConfig,
    terms: &[(RingElement, Share)],
    offset: RingElement,
) -> Result<Share> {
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidConfig("local_linear needs at least one term".into()))?
        .1;
    let mut acc = 0u64;
    for (c, s) in terms {
        if s.session != first.session {
            return Err(Error::SessionMismatch(first.session, s.session));
        }
        if s.party != first.party {
            return Err(Error::InvalidConfig("terms mix parties".into()));
        }
        acc = cfg.add(acc, cfg.mul(*c, s.value));
    }
    acc = cfg.add(acc, cfg.mul(first.party.delta(), offset));
    Ok(Share {
        value: acc,
        party: first.party,
        session: first.session,
    })
}
