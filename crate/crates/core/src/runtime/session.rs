//! Connecting the two computing parties and the dealer, and running one
//! job per session.

use std::net::TcpListener;

use crate::dp::{pi_dp_batch, DpParams};
use crate::error::{Error, Result};
use crate::ml::{pi_train_pipeline, SecretDataset};
use crate::mpc::dealer::Dealer;
use crate::mpc::provision::serve_dealer;
use crate::mpc::transport::{Link, TcpLink};
use crate::mpc::wire::{Frame, KIND_HANDSHAKE};
use crate::mpc::{Party, PartyId, SessionId, Transcript};
use crate::runtime::config::{Role, SessionConfig};
use crate::runtime::files::{assemble, share_path, weights_path, ShareBlock, WeightShares};
use crate::runtime::report::RunReport;

/// Packs text into ring words: byte length first, then 8 bytes per word.
pub fn pack_text(s: &str) -> Vec<u64> {
    let b = s.as_bytes();
    let mut out = vec![b.len() as u64];
    for c in b.chunks(8) {
        let mut w = [0u8; 8];
        w[..c.len()].copy_from_slice(c);
        out.push(u64::from_le_bytes(w));
    }
    out
}

pub fn unpack_text(words: &[u64]) -> Result<String> {
    let len = *words.first().ok_or(Error::Frame("empty text payload".into()))? as usize;
    if words.len() - 1 != len.div_ceil(8) {
        return Err(Error::Frame("text payload length mismatch".into()));
    }
    let mut b: Vec<u8> = words[1..].iter().flat_map(|w| w.to_le_bytes()).collect();
    b.truncate(len);
    String::from_utf8(b).map_err(|_| Error::Frame("text payload is not UTF-8".into()))
}

fn public_text(cfg: &SessionConfig) -> String {
    cfg.public_section()
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

fn parse_public(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// First key whose value differs between two public sections.
pub fn compare_public(local: &[(String, String)], peer: &[(String, String)]) -> Result<()> {
    let find = |v: &[(String, String)], k: &str| v.iter().find(|(a, _)| a == k).map(|(_, b)| b.clone());
    let mut keys: Vec<&String> = local.iter().chain(peer).map(|(k, _)| k).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let (a, b) = (find(local, k), find(peer, k));
        if a != b {
            return Err(Error::ConfigMismatch {
                key: k.clone(),
                local: a.unwrap_or_else(|| "<missing>".into()),
                peer: b.unwrap_or_else(|| "<missing>".into()),
            });
        }
    }
    Ok(())
}

fn hello(cfg: &SessionConfig, party: PartyId) -> Frame {
    let mut payload = vec![party.index() as u64];
    payload.extend(pack_text(&public_text(cfg)));
    Frame::new(KIND_HANDSHAKE, cfg.session, payload)
}

fn read_hello(link: &mut dyn Link) -> Result<(Frame, PartyId, String)> {
    let f = link.recv()?;
    if f.kind != KIND_HANDSHAKE || f.payload.is_empty() {
        return Err(Error::Frame(format!("expected a handshake, got kind {:#04x}", f.kind)));
    }
    let id = PartyId::new(f.payload[0] as u8)?;
    let text = unpack_text(&f.payload[1..])?;
    Ok((f, id, text))
}

/// Exchanges public config sections with the other computing party.
/// Returns the agreed session id.
pub fn handshake(link: &mut dyn Link, cfg: &SessionConfig, party: PartyId) -> Result<SessionId> {
    link.send(&hello(cfg, party))?;
    let (f, peer, text) = read_hello(link)?;
    if peer == party {
        return Err(Error::PartyMismatch(peer.as_u8()));
    }
    compare_public(&cfg.public_section(), &parse_public(&text))?;
    if f.session != cfg.session {
        return Err(Error::SessionMismatch(cfg.session, f.session));
    }
    Ok(f.session)
}

/// Dealer side of the handshake for one connection: reads the party's
/// hello and checks it against the dealer's config.
pub fn dealer_hello(cfg: &SessionConfig, link: &mut dyn Link) -> Result<PartyId> {
    let (f, id, text) = read_hello(link)?;
    if f.session != cfg.session {
        return Err(Error::SessionMismatch(cfg.session, f.session));
    }
    compare_public(&cfg.public_section(), &parse_public(&text))?;
    Ok(id)
}

/// Orders two checked links by party index and acknowledges both.
fn dealer_ack(cfg: &SessionConfig, links: [(PartyId, Box<dyn Link>); 2]) -> Result<[Box<dyn Link>; 2]> {
    let [(ia, a), (ib, b)] = links;
    if ia == ib {
        return Err(Error::PartyMismatch(ia.as_u8()));
    }
    let mut out = if ia == PartyId::P0 { [a, b] } else { [b, a] };
    for (i, l) in out.iter_mut().enumerate() {
        l.send(&Frame::new(KIND_HANDSHAKE, cfg.session, vec![i as u64]))?;
    }
    Ok(out)
}

/// Opens both links of a computing party: the dealer first, then the peer.
/// Party 0 accepts the peer on `listener` (or binds `party0_addr`).
pub fn connect_party(
    cfg: &SessionConfig,
    party: PartyId,
    listener: Option<TcpListener>,
) -> Result<(Box<dyn Link>, Box<dyn Link>)> {
    let mut dealer: Box<dyn Link> = Box::new(TcpLink::connect(&cfg.dealer_addr, cfg.timeout)?);
    dealer.send(&hello(cfg, party))?;
    let ack = dealer.recv()?;
    if ack.kind != KIND_HANDSHAKE {
        return Err(Error::Frame("dealer did not acknowledge the handshake".into()));
    }
    let mut peer: Box<dyn Link> = if party == PartyId::P0 {
        let l = match listener {
            Some(l) => l,
            None => TcpListener::bind(&cfg.party0_addr)?,
        };
        Box::new(TcpLink::accept(&l, cfg.timeout)?)
    } else {
        Box::new(TcpLink::connect(&cfg.party0_addr, cfg.timeout)?)
    };
    handshake(peer.as_mut(), cfg, party)?;
    Ok((peer, dealer))
}

/// Accepts both parties and serves material until they close.
pub fn run_dealer(cfg: &SessionConfig, listener: Option<TcpListener>) -> Result<()> {
    let l = match listener {
        Some(l) => l,
        None => TcpListener::bind(&cfg.dealer_addr)?,
    };
    let accept = || -> Result<(PartyId, Box<dyn Link>)> {
        let mut link: Box<dyn Link> = Box::new(TcpLink::accept(&l, cfg.timeout)?);
        Ok((dealer_hello(cfg, link.as_mut())?, link))
    };
    let first = accept()?;
    let second = accept()?;
    let mut links = dealer_ack(cfg, [first, second])?;
    let mut d = Dealer::new(cfg.ring, cfg.session, cfg.dealer_seed);
    serve_dealer(&mut d, &mut links)?;
    Ok(())
}

/// What a computing party does once connected.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    /// Normalize, train and, when `epsilon` is set, perturb.
    Train(SecretDataset),
    /// Perturb already trained weight shares.
    Perturb(Vec<u64>),
}

/// Shares produced by one party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobOutput {
    /// Trained weights before any noise; the input weights for a
    /// perturbation job.
    pub weights: Vec<u64>,
    /// `noise_runs` perturbed copies, empty without `epsilon`.
    pub noisy: Vec<Vec<u64>>,
}

/// Runs a job on a connected party.
pub fn run_job(p: &mut Party, cfg: &SessionConfig, job: &Job) -> Result<JobOutput> {
    let (weights, n) = match job {
        Job::Train(ds) => {
            let st = pi_train_pipeline(p, ds, &cfg.training, cfg.seed, cfg.skip_norm)
                .map_err(|e| e.in_stage("train"))?;
            (st.w, ds.n)
        }
        Job::Perturb(w) => (
            w.clone(),
            cfg.dp_n
                .ok_or_else(|| Error::InvalidConfig("perturbing stored weights needs `n`".into()))?,
        ),
    };
    let noisy = match cfg.epsilon {
        Some(eps) => {
            let dp = DpParams::new(eps, cfg.training.lambda_reg, cfg.dp_n.unwrap_or(n), weights.len())?;
            pi_dp_batch(p, &weights, cfg.noise_runs, &dp).map_err(|e| e.in_stage("perturb"))?
        }
        None => Vec::new(),
    };
    Ok(JobOutput { weights, noisy })
}

/// Builds the job a party's config describes: shares to train on, or
/// stored weights to perturb.
pub fn load_job(cfg: &SessionConfig, party: PartyId) -> Result<Job> {
    if let Some(prefix) = &cfg.in_weights {
        let w = WeightShares::read(weights_path(prefix, party))?;
        if w.party != party || w.ring != cfg.ring {
            return Err(Error::InvalidConfig(format!("{} does not match this party", prefix.display())));
        }
        return Ok(Job::Perturb(w.run(0).to_vec()));
    }
    if cfg.shares.is_empty() {
        return Err(Error::InvalidConfig("no `shares` or `in_weights` configured".into()));
    }
    let blocks = cfg
        .shares
        .iter()
        .map(|p| ShareBlock::read(share_path(p, party)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Job::Train(assemble(party, &cfg.ring, cfg.session, &blocks)?))
}

/// Writes the job's weight shares and report as configured. Trained
/// weights go to `out_weights`; perturbed runs, when present, to
/// `out_weights` with a `.noisy` suffix.
pub fn save_outputs(cfg: &SessionConfig, party: PartyId, out: &JobOutput, t: &Transcript) -> Result<()> {
    if let Some(prefix) = &cfg.out_weights {
        let d = out.weights.len();
        let ws = |values: Vec<u64>| WeightShares {
            party,
            ring: cfg.ring,
            session: cfg.session,
            d,
            values,
        };
        ws(out.weights.clone()).write(weights_path(prefix, party))?;
        if !out.noisy.is_empty() {
            let mut noisy = prefix.as_os_str().to_owned();
            noisy.push(".noisy");
            ws(out.noisy.concat()).write(weights_path(noisy.as_ref(), party))?;
        }
    }
    if let Some(path) = &cfg.report {
        let mut s = path.as_os_str().to_owned();
        s.push(format!(".p{}", party.index()));
        RunReport::from_transcript(party, t).write(std::path::PathBuf::from(s), true)?;
    }
    Ok(())
}

/// Result of one role's process.
#[derive(Debug)]
pub enum RoleOutcome {
    Party(JobOutput, RunReport),
    Dealer,
}

/// Runs one role to completion: connect, handshake, compute, save.
pub fn run_role(cfg: &SessionConfig, role: Role, listener: Option<TcpListener>) -> Result<RoleOutcome> {
    let Some(party) = role.party() else {
        run_dealer(cfg, listener)?;
        return Ok(RoleOutcome::Dealer);
    };
    let job = load_job(cfg, party)?;
    let (out, t) = run_party(cfg, party, &job, listener)?;
    save_outputs(cfg, party, &out, &t)?;
    Ok(RoleOutcome::Party(out, RunReport::from_transcript(party, &t)))
}

/// Connects a computing party and runs `job`.
pub fn run_party(
    cfg: &SessionConfig,
    party: PartyId,
    job: &Job,
    listener: Option<TcpListener>,
) -> Result<(JobOutput, Transcript)> {
    let (peer, dealer) = connect_party(cfg, party, listener)?;
    let mut p = Party::new(cfg.ring, party, cfg.session, peer, Some(dealer));
    let out = run_job(&mut p, cfg, job)?;
    p.close()?;
    Ok((out, p.take_transcript()))
}

/// Runs the dealer and both parties as threads of this process over
/// loopback TCP, with jobs loaded from the configured files. Port 0 in
/// either address picks a free port.
pub fn run_local(cfg: &SessionConfig) -> Result<[(JobOutput, Transcript); 2]> {
    let jobs = [load_job(cfg, PartyId::P0)?, load_job(cfg, PartyId::P1)?];
    let out = run_local_with(cfg, &jobs)?;
    for (i, (o, t)) in out.iter().enumerate() {
        save_outputs(cfg, PartyId::new(i as u8)?, o, t)?;
    }
    Ok(out)
}

/// Like [`run_local`] with the jobs given directly.
pub fn run_local_with(cfg: &SessionConfig, jobs: &[Job; 2]) -> Result<[(JobOutput, Transcript); 2]> {
    let mut cfg = cfg.clone();
    let dealer_l = TcpListener::bind(&cfg.dealer_addr)?;
    let peer_l = TcpListener::bind(&cfg.party0_addr)?;
    cfg.dealer_addr = dealer_l.local_addr()?.to_string();
    cfg.party0_addr = peer_l.local_addr()?.to_string();
    let cfg = &cfg;
    std::thread::scope(|s| {
        let d = s.spawn(move || run_dealer(cfg, Some(dealer_l)));
        let p1 = s.spawn(move || run_party(cfg, PartyId::P1, &jobs[1], None));
        let r0 = run_party(cfg, PartyId::P0, &jobs[0], Some(peer_l));
        let r1 = p1.join().unwrap_or(Err(Error::Disconnected));
        let rd = d.join().unwrap_or(Err(Error::Disconnected));
        let out = [r0?, r1?];
        rd?;
        Ok(out)
    })
}
