//! Length-prefixed binary framing shared by the dealer link, the
//! party-to-party link and the share/weight files.
//!
//! ```text
//! u32 len | u8 kind | u32 session | [u32 round] | u64 payload...
//! ```
//!
//! All integers are little-endian. `len` counts every byte after itself.
//! The round counter is present only for kinds below `0x10`, which are the
//! party-to-party messages.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mpc::share::SessionId;

pub const KIND_OPEN: u8 = 0x01;
pub const KIND_HANDSHAKE: u8 = 0x02;
pub const KIND_REQUEST: u8 = 0x10;
pub const KIND_TRIPLES: u8 = 0x11;
pub const KIND_TRUNC: u8 = 0x12;
pub const KIND_BITS: u8 = 0x13;
pub const KIND_CLOSE: u8 = 0x1F;
pub const KIND_SHARE_HEADER: u8 = 0x20;
pub const KIND_SHARE_MATRIX: u8 = 0x21;
pub const KIND_SHARE_LABELS: u8 = 0x22;
pub const KIND_WEIGHTS_HEADER: u8 = 0x30;
pub const KIND_WEIGHTS_VALUES: u8 = 0x31;

/// Frames above this size are rejected as corrupt.
pub const MAX_FRAME_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub session: SessionId,
    pub round: Option<u32>,
    pub payload: Vec<u64>,
}

pub fn has_round(kind: u8) -> bool {
    kind < 0x10
}

impl Frame {
    pub fn new(kind: u8, session: SessionId, payload: Vec<u64>) -> Self {
        Frame {
            kind,
            session,
            round: None,
            payload,
        }
    }

    pub fn with_round(kind: u8, session: SessionId, round: u32, payload: Vec<u64>) -> Self {
        Frame {
            kind,
            session,
            round: Some(round),
            payload,
        }
    }

    /// Size of the encoded frame including the length prefix.
    pub fn wire_len(&self) -> usize {
        4 + body_len(self.kind, self.payload.len())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let body = body_len(self.kind, self.payload.len());
        out.extend_from_slice(&(body as u32).to_le_bytes());
        out.push(self.kind);
        out.extend_from_slice(&self.session.to_le_bytes());
        if has_round(self.kind) {
            out.extend_from_slice(&self.round.unwrap_or(0).to_le_bytes());
        }
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    /// Decodes one frame body (everything after the length prefix).
    pub fn decode_body(body: &[u8]) -> Result<Frame> {
        if body.len() < 5 {
            return Err(Error::Frame(format!("body of {} bytes is too short", body.len())));
        }
        let kind = body[0];
        let session = u32::from_le_bytes(body[1..5].try_into().expect("4 bytes"));
        let (round, rest) = if has_round(kind) {
            if body.len() < 9 {
                return Err(Error::Frame("missing round counter".into()));
            }
            (
                Some(u32::from_le_bytes(body[5..9].try_into().expect("4 bytes"))),
                &body[9..],
            )
        } else {
            (None, &body[5..])
        };
        if rest.len() % 8 != 0 {
            return Err(Error::Frame(format!(
                "payload of {} bytes is not a whole number of ring elements",
                rest.len()
            )));
        }
        let payload = rest
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Frame {
            kind,
            session,
            round,
            payload,
        })
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < 4 {
            return Err(Error::Frame("missing length prefix".into()));
        }
        let len = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        if bytes.len() - 4 != len {
            return Err(Error::Frame(format!(
                "length prefix says {len} bytes, found {}",
                bytes.len() - 4
            )));
        }
        Frame::decode_body(&bytes[4..])
    }
}

fn body_len(kind: u8, n: usize) -> usize {
    1 + 4 + if has_round(kind) { 4 } else { 0 } + 8 * n
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    w.write_all(&frame.encode())?;
    Ok(())
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream before the
/// length prefix.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Frame>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Frame("truncated length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(Error::Frame(format!("frame of {len} bytes exceeds the limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Frame("truncated frame body".into()),
        _ => e.into(),
    })?;
    Frame::decode_body(&body).map(Some)
}

/// Reads a frame and checks its kind.
pub fn expect_frame<R: Read>(r: &mut R, kind: u8) -> Result<Frame> {
    let f = read_frame(r)?.ok_or(Error::Disconnected)?;
    if f.kind != kind {
        return Err(Error::Frame(format!(
            "expected kind {kind:#04x}, got {:#04x}",
            f.kind
        )));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_frame_layout() {
        let f = Frame::with_round(KIND_OPEN, 7, 3, vec![1, u64::MAX]);
        let b = f.encode();
        assert_eq!(b.len(), f.wire_len());
        assert_eq!(&b[..4], &(1 + 4 + 4 + 16u32).to_le_bytes());
        assert_eq!(b[4], KIND_OPEN);
        assert_eq!(&b[5..9], &7u32.to_le_bytes());
        assert_eq!(&b[9..13], &3u32.to_le_bytes());
        assert_eq!(&b[13..21], &1u64.to_le_bytes());
        assert_eq!(Frame::decode(&b).unwrap(), f);
    }

    #[test]
    fn dealer_frame_has_no_round() {
        let f = Frame::new(KIND_TRIPLES, 2, vec![5, 6, 7]);
        let b = f.encode();
        assert_eq!(b.len(), 4 + 1 + 4 + 24);
        assert_eq!(Frame::decode(&b).unwrap(), f);
    }

    #[test]
    fn stream_round_trip_and_eof() {
        let frames = vec![
            Frame::with_round(KIND_OPEN, 1, 0, vec![]),
            Frame::new(KIND_BITS, 1, (0..100).collect()),
        ];
        let mut buf = Vec::new();
        for f in &frames {
            write_frame(&mut buf, f).unwrap();
        }
        let mut cur = std::io::Cursor::new(buf);
        for f in &frames {
            assert_eq!(&read_frame(&mut cur).unwrap().unwrap(), f);
        }
        assert!(read_frame(&mut cur).unwrap().is_none());
    }

    #[test]
    fn malformed_frames_are_rejected() {
        let mut b = Frame::new(KIND_BITS, 1, vec![1]).encode();
        b.pop();
        assert!(Frame::decode(&b).is_err());
        let mut cur = std::io::Cursor::new(b);
        assert!(matches!(read_frame(&mut cur), Err(Error::Frame(_))));
        let odd = [6u8, 0, 0, 0, KIND_BITS, 0, 0, 0, 0, 9];
        assert!(Frame::decode(&odd).is_err());
    }
}
