//! Runs both computing parties and the dealer of one session inside the
//! current process, as threads over in-memory or loopback TCP links.

use std::net::TcpListener;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::fixed::{RingConfig, RingElement};
use crate::mpc::dealer::Dealer;
use crate::mpc::party::Party;
use crate::mpc::provision::serve_dealer;
use crate::mpc::share::{share_vec, PartyId, SessionId};
use crate::mpc::transport::{Link, MemLink, TcpLink};

pub const SIM_SESSION: SessionId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Memory,
    Tcp,
}

/// Connected links for a full session: peer links for both parties,
/// party-side dealer links and dealer-side links.
pub struct SessionLinks {
    pub peer: [Box<dyn Link>; 2],
    pub to_dealer: [Box<dyn Link>; 2],
    pub at_dealer: [Box<dyn Link>; 2],
}

impl SessionLinks {
    pub fn memory() -> SessionLinks {
        let (p0, p1) = MemLink::pair();
        let (d0, s0) = MemLink::pair();
        let (d1, s1) = MemLink::pair();
        SessionLinks {
            peer: [Box::new(p0), Box::new(p1)],
            to_dealer: [Box::new(d0), Box::new(d1)],
            at_dealer: [Box::new(s0), Box::new(s1)],
        }
    }

    /// Loopback TCP on ephemeral ports.
    pub fn tcp() -> Result<SessionLinks> {
        let timeout = Duration::from_secs(10);
        let pair = || -> Result<(TcpLink, TcpLink)> {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?.to_string();
            let h = std::thread::spawn(move || TcpLink::connect(&addr, timeout));
            let a = TcpLink::accept(&listener, timeout)?;
            let b = h.join().map_err(|_| Error::Disconnected)??;
            Ok((a, b))
        };
        let (p0, p1) = pair()?;
        let (s0, d0) = pair()?;
        let (s1, d1) = pair()?;
        Ok(SessionLinks {
            peer: [Box::new(p0), Box::new(p1)],
            to_dealer: [Box::new(d0), Box::new(d1)],
            at_dealer: [Box::new(s0), Box::new(s1)],
        })
    }

    pub fn new(kind: TransportKind) -> Result<SessionLinks> {
        match kind {
            TransportKind::Memory => Ok(SessionLinks::memory()),
            TransportKind::Tcp => SessionLinks::tcp(),
        }
    }
}

/// Runs `f` at both parties with a dealer thread, returning each party's
/// result. Party 0's result comes first.
pub fn try_run_pair_with<T, F>(
    cfg: RingConfig,
    dealer_seed: u64,
    links: SessionLinks,
    f: F,
) -> [Result<T>; 2]
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let SessionLinks {
        peer,
        to_dealer,
        mut at_dealer,
    } = links;
    let [peer0, peer1] = peer;
    let [dl0, dl1] = to_dealer;
    std::thread::scope(|s| {
        let dealer = s.spawn(move || {
            let mut d = Dealer::new(cfg, SIM_SESSION, dealer_seed);
            serve_dealer(&mut d, &mut at_dealer)
        });
        let f = &f;
        let run = move |id: PartyId, peer: Box<dyn Link>, dl: Box<dyn Link>| {
            let mut p = Party::new(cfg, id, SIM_SESSION, peer, Some(dl));
            let out = f(&mut p);
            if out.is_ok() {
                p.close()?;
            }
            out
        };
        let h1 = s.spawn(move || run(PartyId::P1, peer1, dl1));
        let r0 = run(PartyId::P0, peer0, dl0);
        let r1 = h1.join().unwrap_or(Err(Error::Disconnected));
        let _ = dealer.join();
        [r0, r1]
    })
}

pub fn try_run_pair<T, F>(cfg: RingConfig, dealer_seed: u64, f: F) -> [Result<T>; 2]
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    try_run_pair_with(cfg, dealer_seed, SessionLinks::memory(), f)
}

/// Like [`try_run_pair`] but fails if either party fails.
pub fn run_pair<T, F>(cfg: RingConfig, dealer_seed: u64, f: F) -> Result<[T; 2]>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let [a, b] = try_run_pair(cfg, dealer_seed, f);
    Ok([a?, b?])
}

pub fn run_pair_over<T, F>(
    cfg: RingConfig,
    dealer_seed: u64,
    transport: TransportKind,
    f: F,
) -> Result<[T; 2]>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let [a, b] = try_run_pair_with(cfg, dealer_seed, SessionLinks::new(transport)?, f);
    Ok([a?, b?])
}

/// Shares `values` with a seeded generator, returning party 0's and party
/// 1's halves.
pub fn share_for(cfg: &RingConfig, values: &[RingElement], seed: u64) -> (Vec<u64>, Vec<u64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (a, b) = share_vec(cfg, values, SIM_SESSION, &mut rng);
    (a.values, b.values)
}

/// Sums the two parties' shares.
pub fn reveal(cfg: &RingConfig, a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| cfg.add(x, y)).collect()
}
