//! Per-party run reports derived from a transcript.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::mpc::{PartyId, ProtoStats, Transcript};

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub party: PartyId,
    pub total: ProtoStats,
    /// Inclusive counters per label, nested labels included.
    pub protocols: BTreeMap<String, ProtoStats>,
    /// Seconds spent waiting on each round, in round order.
    pub round_seconds: Vec<f64>,
}

impl RunReport {
    pub fn from_transcript(party: PartyId, t: &Transcript) -> RunReport {
        let protocols = t
            .entries()
            .keys()
            .map(|k| (k.clone(), t.inclusive(k)))
            .collect();
        RunReport {
            party,
            total: t.total(),
            protocols,
            round_seconds: t.rounds().iter().map(|r| r.elapsed.as_secs_f64()).collect(),
        }
    }

    pub fn stage(&self, label: &str) -> ProtoStats {
        self.protocols.get(label).copied().unwrap_or_default()
    }

    /// `key = value` lines. Wall-clock fields are left out unless
    /// `with_timings` is set, so two runs of the same session compare
    /// equal byte for byte.
    pub fn to_kv(&self, with_timings: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "party = {}", self.party.index());
        write_stats(&mut out, "total", &self.total, with_timings);
        for (k, v) in &self.protocols {
            write_stats(&mut out, &format!("proto.{k}"), v, with_timings);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>, with_timings: bool) -> Result<()> {
        std::fs::write(path, self.to_kv(with_timings))?;
        Ok(())
    }
}

pub(crate) fn write_stats(out: &mut String, key: &str, s: &ProtoStats, with_timings: bool) {
    let _ = writeln!(out, "{key}.rounds = {}", s.rounds);
    let _ = writeln!(out, "{key}.bytes_sent = {}", s.bytes_sent);
    let _ = writeln!(out, "{key}.bytes_received = {}", s.bytes_received);
    let _ = writeln!(out, "{key}.elements_opened = {}", s.elements_opened);
    let _ = writeln!(out, "{key}.triples = {}", s.triples);
    if with_timings {
        let _ = writeln!(out, "{key}.seconds = {:.6}", s.seconds);
    }
}
