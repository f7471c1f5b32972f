//! Share and weight files written by data owners and computing parties.
//!
//! Both are sequences of wire frames: a header frame followed by value
//! frames.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::ml::SecretDataset;
use crate::mpc::share::{share_vec, PartyId, SessionId};
use crate::mpc::wire::{
    expect_frame, read_frame, write_frame, Frame, KIND_SHARE_HEADER, KIND_SHARE_LABELS, KIND_SHARE_MATRIX,
    KIND_WEIGHTS_HEADER, KIND_WEIGHTS_VALUES,
};

pub const FILE_VERSION: u64 = 1;

pub fn share_path(prefix: &Path, party: PartyId) -> PathBuf {
    suffixed(prefix, &format!(".p{}.shares", party.index()))
}

pub fn weights_path(prefix: &Path, party: PartyId) -> PathBuf {
    suffixed(prefix, &format!(".p{}.weights", party.index()))
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Where an owner's block sits in the global training matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlacement {
    pub total_rows: usize,
    pub total_cols: usize,
    pub row_offset: usize,
    pub col_offset: usize,
}

impl BlockPlacement {
    /// The whole matrix is one block.
    pub fn whole(ds: &Dataset) -> BlockPlacement {
        BlockPlacement {
            total_rows: ds.n,
            total_cols: ds.m,
            row_offset: 0,
            col_offset: 0,
        }
    }
}

/// One party's shares of one owner's block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareBlock {
    pub party: PartyId,
    pub ring: RingConfig,
    pub session: SessionId,
    pub place: BlockPlacement,
    pub rows: usize,
    pub cols: usize,
    pub x: Vec<u64>,
    pub t: Option<Vec<u64>>,
}

/// Encodes every cell and label and splits them into two shares.
/// `labels` is `None` for an owner that holds only features.
pub fn ingest_shares<R: Rng + ?Sized>(
    ring: &RingConfig,
    session: SessionId,
    x: &[f64],
    labels: Option<&[f64]>,
    rows: usize,
    cols: usize,
    place: BlockPlacement,
    rng: &mut R,
) -> Result<[ShareBlock; 2]> {
    if x.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: x.len(),
        });
    }
    if place.row_offset + rows > place.total_rows || place.col_offset + cols > place.total_cols {
        return Err(Error::PlanInvalid(format!(
            "{rows}x{cols} block at ({}, {}) exceeds {}x{}",
            place.row_offset, place.col_offset, place.total_rows, place.total_cols
        )));
    }
    let mut enc = Vec::with_capacity(x.len());
    for (k, &v) in x.iter().enumerate() {
        enc.push(ring.encode(v).map_err(|_| Error::CellOverflow {
            row: place.row_offset + k / cols.max(1),
            col: place.col_offset + k % cols.max(1),
            value: v,
        })?);
    }
    let (x0, x1) = share_vec(ring, &enc, session, rng);
    let (t0, t1) = match labels {
        Some(t) => {
            if t.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: t.len(),
                });
            }
            let te = ring.encode_vec(t)?;
            let (a, b) = share_vec(ring, &te, session, rng);
            (Some(a.values), Some(b.values))
        }
        None => (None, None),
    };
    let block = |party, x, t| ShareBlock {
        party,
        ring: *ring,
        session,
        place,
        rows,
        cols,
        x,
        t,
    };
    Ok([block(PartyId::P0, x0.values, t0), block(PartyId::P1, x1.values, t1)])
}

impl ShareBlock {
    fn header(&self) -> Vec<u64> {
        let p = &self.place;
        vec![
            FILE_VERSION,
            self.party.index() as u64,
            self.ring.lambda as u64,
            self.ring.frac_bits as u64,
            p.total_rows as u64,
            p.total_cols as u64,
            p.row_offset as u64,
            p.col_offset as u64,
            self.rows as u64,
            self.cols as u64,
            self.t.is_some() as u64,
        ]
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_frame(&mut w, &Frame::new(KIND_SHARE_HEADER, self.session, self.header()))?;
        write_frame(&mut w, &Frame::new(KIND_SHARE_MATRIX, self.session, self.x.clone()))?;
        if let Some(t) = &self.t {
            write_frame(&mut w, &Frame::new(KIND_SHARE_LABELS, self.session, t.clone()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<ShareBlock> {
        let mut r = BufReader::new(File::open(path)?);
        let head = expect_frame(&mut r, KIND_SHARE_HEADER)?;
        let h = &head.payload;
        if h.len() != 11 || h[0] != FILE_VERSION {
            return Err(Error::Frame("unsupported share file header".into()));
        }
        let ring = RingConfig::new(h[2] as u32, h[3] as u32)?;
        let u = |i: usize| h[i] as usize;
        let (rows, cols) = (u(8), u(9));
        let x = expect_frame(&mut r, KIND_SHARE_MATRIX)?;
        check_len(&x, head.session, rows * cols)?;
        let t = if h[10] == 1 {
            let t = expect_frame(&mut r, KIND_SHARE_LABELS)?;
            check_len(&t, head.session, rows)?;
            Some(t.payload)
        } else {
            None
        };
        if read_frame(&mut r)?.is_some() {
            return Err(Error::Frame("trailing frames in share file".into()));
        }
        Ok(ShareBlock {
            party: PartyId::new(h[1] as u8)?,
            ring,
            session: head.session,
            place: BlockPlacement {
                total_rows: u(4),
                total_cols: u(5),
                row_offset: u(6),
                col_offset: u(7),
            },
            rows,
            cols,
            x: x.payload,
            t,
        })
    }
}

fn check_len(f: &Frame, session: SessionId, len: usize) -> Result<()> {
    if f.session != session {
        return Err(Error::SessionMismatch(session, f.session));
    }
    if f.payload.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: f.payload.len(),
        });
    }
    Ok(())
}

/// Places every block into the global matrix. Blocks must belong to
/// `party`, agree on ring, session and shape, cover every cell exactly
/// once and provide a label for every row.
pub fn assemble(
    party: PartyId,
    ring: &RingConfig,
    session: SessionId,
    blocks: &[ShareBlock],
) -> Result<SecretDataset> {
    let first = blocks.first().ok_or(Error::PlanInvalid("no share blocks".into()))?;
    let (n, m) = (first.place.total_rows, first.place.total_cols);
    let mut x = vec![0u64; n * m];
    let mut seen = vec![false; n * m];
    let mut t = vec![0u64; n];
    let mut labeled = vec![false; n];
    for b in blocks {
        if b.party != party {
            return Err(Error::PartyMismatch(b.party.as_u8()));
        }
        if b.session != session {
            return Err(Error::SessionMismatch(session, b.session));
        }
        if b.ring != *ring {
            return Err(Error::ConfigMismatch {
                key: "ring".into(),
                local: format!("{ring:?}"),
                peer: format!("{:?}", b.ring),
            });
        }
        if (b.place.total_rows, b.place.total_cols) != (n, m) {
            return Err(Error::PlanInvalid("share blocks disagree on the matrix shape".into()));
        }
        let p = &b.place;
        if p.row_offset + b.rows > n || p.col_offset + b.cols > m {
            return Err(Error::PlanInvalid("share block outside the matrix".into()));
        }
        for i in 0..b.rows {
            for j in 0..b.cols {
                let k = (p.row_offset + i) * m + p.col_offset + j;
                if seen[k] {
                    return Err(Error::PlanInvalid(format!(
                        "cell ({}, {}) appears in two blocks",
                        p.row_offset + i,
                        p.col_offset + j
                    )));
                }
                seen[k] = true;
                x[k] = b.x[i * b.cols + j];
            }
        }
        if let Some(lab) = &b.t {
            for (i, &v) in lab.iter().enumerate() {
                let r = p.row_offset + i;
                if labeled[r] {
                    return Err(Error::PlanInvalid(format!("row {r} labeled twice")));
                }
                labeled[r] = true;
                t[r] = v;
            }
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::PlanInvalid(format!("cell ({}, {}) not covered", k / m, k % m)));
    }
    if let Some(r) = labeled.iter().position(|s| !s) {
        return Err(Error::PlanInvalid(format!("row {r} has no label")));
    }
    SecretDataset::new(x, t, n, m)
}

/// One party's shares of a weight vector, possibly several perturbed
/// copies of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightShares {
    pub party: PartyId,
    pub ring: RingConfig,
    pub session: SessionId,
    pub d: usize,
    /// `runs x d`, run-major.
    pub values: Vec<u64>,
}

impl WeightShares {
    pub fn runs(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.values.len() / self.d
        }
    }

    pub fn run(&self, i: usize) -> &[u64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let head = vec![
            FILE_VERSION,
            self.party.index() as u64,
            self.ring.lambda as u64,
            self.ring.frac_bits as u64,
            self.d as u64,
            self.runs() as u64,
        ];
        write_frame(&mut w, &Frame::new(KIND_WEIGHTS_HEADER, self.session, head))?;
        write_frame(&mut w, &Frame::new(KIND_WEIGHTS_VALUES, self.session, self.values.clone()))?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<WeightShares> {
        let mut r = BufReader::new(File::open(path)?);
        let head = expect_frame(&mut r, KIND_WEIGHTS_HEADER)?;
        let h = &head.payload;
        if h.len() != 6 || h[0] != FILE_VERSION {
            return Err(Error::Frame("unsupported weight file header".into()));
        }
        let v = expect_frame(&mut r, KIND_WEIGHTS_VALUES)?;
        check_len(&v, head.session, (h[4] * h[5]) as usize)?;
        Ok(WeightShares {
            party: PartyId::new(h[1] as u8)?,
            ring: RingConfig::new(h[2] as u32, h[3] as u32)?,
            session: head.session,
            d: h[4] as usize,
            values: v.payload,
        })
    }
}

/// Reconstructs and decodes weights from both parties' files, one vector
/// per run.
pub fn open_weights(a: &WeightShares, b: &WeightShares) -> Result<Vec<Vec<f64>>> {
    if a.party == b.party {
        return Err(Error::PartyMismatch(a.party.as_u8()));
    }
    if a.session != b.session {
        return Err(Error::SessionMismatch(a.session, b.session));
    }
    if a.ring != b.ring || a.d != b.d || a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch {
            expected: a.values.len(),
            got: b.values.len(),
        });
    }
    let c = a.ring;
    Ok((0..a.runs())
        .map(|i| {
            a.run(i)
                .iter()
                .zip(b.run(i))
                .map(|(&x, &y)| c.decode(c.add(x, y)))
                .collect()
        })
        .collect())
}

/// One run per line, coefficients comma-separated.
pub fn write_model_csv(path: impl AsRef<Path>, runs: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in runs {
        let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("bad coefficient `{v}`"),
                    })
                })
                .collect()
        })
        .collect()
}
