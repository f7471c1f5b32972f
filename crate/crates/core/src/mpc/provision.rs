//! Dealer service loop and the request/response codec used by parties.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mpc::dealer::{Dealer, Material, Requirements, TripleBatch, TruncBatch};
use crate::mpc::share::SessionId;
use crate::mpc::transport::Link;
use crate::mpc::wire::{Frame, KIND_BITS, KIND_CLOSE, KIND_REQUEST, KIND_TRIPLES, KIND_TRUNC};

pub fn encode_request(session: SessionId, req: &Requirements) -> Frame {
    let mut p = vec![req.triples as u64, req.bits as u64];
    let trunc: Vec<_> = req.trunc.iter().filter(|(_, &c)| c > 0).collect();
    p.push(trunc.len() as u64);
    for (&m, &c) in trunc {
        p.push(m as u64);
        p.push(c as u64);
    }
    Frame::new(KIND_REQUEST, session, p)
}

pub fn decode_request(f: &Frame) -> Result<Requirements> {
    let p = &f.payload;
    if f.kind != KIND_REQUEST || p.len() < 3 {
        return Err(Error::Frame("bad provisioning request".into()));
    }
    let n = p[2] as usize;
    if p.len() != 3 + 2 * n {
        return Err(Error::Frame("provisioning request length mismatch".into()));
    }
    let mut trunc = BTreeMap::new();
    for i in 0..n {
        trunc.insert(p[3 + 2 * i] as u32, p[4 + 2 * i] as usize);
    }
    Ok(Requirements {
        triples: p[0] as usize,
        bits: p[1] as usize,
        trunc,
    })
}

fn send_material(link: &mut dyn Link, session: SessionId, m: Material) -> Result<()> {
    let t = m.triples;
    let mut p = Vec::with_capacity(1 + 3 * t.len());
    p.push(t.first_id);
    p.extend(t.u);
    p.extend(t.v);
    p.extend(t.w);
    link.send(&Frame::new(KIND_TRIPLES, session, p))?;
    link.send(&Frame::new(KIND_BITS, session, m.bits))?;
    for b in m.trunc {
        let mut p = Vec::with_capacity(2 + b.len() * (3 + b.shift as usize));
        p.push(b.shift as u64);
        p.push(b.len() as u64);
        p.extend(b.r);
        p.extend(b.r_shifted);
        p.extend(b.msb);
        p.extend(b.low_bits);
        link.send(&Frame::new(KIND_TRUNC, session, p))?;
    }
    Ok(())
}

fn expect(link: &mut dyn Link, kind: u8, session: SessionId) -> Result<Frame> {
    let f = link.recv()?;
    if f.kind != kind {
        return Err(Error::Frame(format!(
            "expected kind {kind:#04x} from dealer, got {:#04x}",
            f.kind
        )));
    }
    if f.session != session {
        return Err(Error::SessionMismatch(session, f.session));
    }
    Ok(f)
}

/// Sends `req` to the dealer and reads back this party's material.
pub fn request_material(
    link: &mut dyn Link,
    session: SessionId,
    req: &Requirements,
) -> Result<Material> {
    link.send(&encode_request(session, req))?;
    let f = expect(link, KIND_TRIPLES, session)?;
    let n = req.triples;
    if f.payload.len() != 1 + 3 * n {
        return Err(Error::Frame("triple frame length mismatch".into()));
    }
    let p = f.payload;
    let triples = TripleBatch {
        first_id: p[0],
        u: p[1..1 + n].to_vec(),
        v: p[1 + n..1 + 2 * n].to_vec(),
        w: p[1 + 2 * n..].to_vec(),
    };
    let bits = expect(link, KIND_BITS, session)?.payload;
    if bits.len() != req.bits {
        return Err(Error::Frame("bit frame length mismatch".into()));
    }
    let mut trunc = Vec::new();
    for (&shift, &count) in req.trunc.iter().filter(|(_, &c)| c > 0) {
        let p = expect(link, KIND_TRUNC, session)?.payload;
        let m = shift as usize;
        if p.len() != 2 + count * (3 + m) || p[0] != shift as u64 || p[1] != count as u64 {
            return Err(Error::Frame("truncation frame mismatch".into()));
        }
        let body = &p[2..];
        trunc.push(TruncBatch {
            shift,
            r: body[..count].to_vec(),
            r_shifted: body[count..2 * count].to_vec(),
            msb: body[2 * count..3 * count].to_vec(),
            low_bits: body[3 * count..].to_vec(),
        });
    }
    Ok(Material {
        triples,
        trunc,
        bits,
    })
}

pub fn send_close(link: &mut dyn Link, session: SessionId) -> Result<()> {
    link.send(&Frame::new(KIND_CLOSE, session, vec![]))
}

/// Serves both parties of one session until both send a close frame.
///
/// Requests are read from party 0 then party 1 and must agree; the dealer
/// then issues one batch and sends each party its half. Returns the total
/// requirements served.
pub fn serve_dealer(
    dealer: &mut Dealer,
    links: &mut [Box<dyn Link>; 2],
) -> Result<Requirements> {
    let session = dealer.session();
    let mut served = Requirements::default();
    loop {
        let f0 = links[0].recv()?;
        let f1 = links[1].recv()?;
        for f in [&f0, &f1] {
            if f.session != session {
                return Err(Error::SessionMismatch(session, f.session));
            }
        }
        match (f0.kind, f1.kind) {
            (KIND_CLOSE, KIND_CLOSE) => return Ok(served),
            (KIND_REQUEST, KIND_REQUEST) => {
                let r0 = decode_request(&f0)?;
                let r1 = decode_request(&f1)?;
                if r0 != r1 {
                    return Err(Error::Frame(format!(
                        "parties requested different material: {r0:?} vs {r1:?}"
                    )));
                }
                let [m0, m1] = dealer.issue(&r0)?;
                send_material(links[0].as_mut(), session, m0)?;
                send_material(links[1].as_mut(), session, m1)?;
                served.add(&r0);
            }
            (a, b) => {
                return Err(Error::Frame(format!(
                    "dealer expected matching requests, got kinds {a:#04x} and {b:#04x}"
                )))
            }
        }
    }
}
