//! Per-round and per-protocol communication accounting.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

/// Counters for one protocol label.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProtoStats {
    pub rounds: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub elements_opened: u64,
    pub triples: u64,
    /// Wall-clock seconds spent inside the scope, children included.
    pub seconds: f64,
}

impl ProtoStats {
    pub fn add(&mut self, o: &ProtoStats) {
        self.rounds += o.rounds;
        self.bytes_sent += o.bytes_sent;
        self.bytes_received += o.bytes_received;
        self.elements_opened += o.elements_opened;
        self.triples += o.triples;
        self.seconds += o.seconds;
    }

    pub fn bytes(&self) -> u64 {
        self.bytes_sent + self.bytes_received
    }

    /// Everything except the timing field.
    pub fn counts(&self) -> [u64; 5] {
        [
            self.rounds,
            self.bytes_sent,
            self.bytes_received,
            self.elements_opened,
            self.triples,
        ]
    }
}

/// One opening as seen by this party.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTranscript {
    pub round: u32,
    pub label: String,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub elapsed: Duration,
}

pub const UNSCOPED: &str = "unscoped";

/// Communication log of one party. Counters go to the innermost active
/// scope, whose label is the `/`-joined path of enclosing scopes.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    stack: Vec<(String, Instant)>,
    stats: BTreeMap<String, ProtoStats>,
    rounds: Vec<RoundTranscript>,
}

impl Transcript {
    fn label(&self) -> String {
        match self.stack.last() {
            Some((l, _)) => l.clone(),
            None => UNSCOPED.to_string(),
        }
    }

    pub fn enter(&mut self, label: &str) {
        let full = match self.stack.last() {
            Some((parent, _)) => format!("{parent}/{label}"),
            None => label.to_string(),
        };
        self.stats.entry(full.clone()).or_default();
        self.stack.push((full, Instant::now()));
    }

    pub fn exit(&mut self) {
        if let Some((label, start)) = self.stack.pop() {
            self.stats.entry(label).or_default().seconds += start.elapsed().as_secs_f64();
        }
    }

    pub(crate) fn note_round(
        &mut self,
        round: u32,
        sent: usize,
        received: usize,
        elements: usize,
        elapsed: Duration,
    ) {
        let label = self.label();
        let s = self.stats.entry(label.clone()).or_default();
        s.rounds += 1;
        s.bytes_sent += sent as u64;
        s.bytes_received += received as u64;
        s.elements_opened += elements as u64;
        self.rounds.push(RoundTranscript {
            round,
            label,
            bytes_sent: sent as u64,
            bytes_received: received as u64,
            elapsed,
        });
    }

    pub(crate) fn note_triples(&mut self, n: usize) {
        let label = self.label();
        self.stats.entry(label).or_default().triples += n as u64;
    }

    pub fn rounds(&self) -> &[RoundTranscript] {
        &self.rounds
    }

    /// Exclusive counters per label.
    pub fn entries(&self) -> &BTreeMap<String, ProtoStats> {
        &self.stats
    }

    pub fn get(&self, label: &str) -> ProtoStats {
        self.stats.get(label).copied().unwrap_or_default()
    }

    /// Counters of `prefix` and every scope nested below it. Seconds are
    /// taken from `prefix` alone since scope timings are already inclusive.
    pub fn inclusive(&self, prefix: &str) -> ProtoStats {
        let nested = format!("{prefix}/");
        let mut out = ProtoStats::default();
        for (k, v) in &self.stats {
            if k == prefix || k.starts_with(&nested) {
                out.add(&ProtoStats { seconds: 0.0, ..*v });
            }
        }
        out.seconds = self.get(prefix).seconds;
        out
    }

    pub fn total(&self) -> ProtoStats {
        let mut out = ProtoStats::default();
        for v in self.stats.values() {
            out.add(&ProtoStats { seconds: 0.0, ..*v });
        }
        out.seconds = self.rounds.iter().map(|r| r.elapsed.as_secs_f64()).sum();
        out
    }

    /// Appends `other` with its labels nested under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: &Transcript) {
        for (k, v) in &other.stats {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}/{k}")
            };
            self.stats.entry(key).or_default().add(v);
        }
        self.rounds.extend(other.rounds.iter().cloned().map(|mut r| {
            if !prefix.is_empty() {
                r.label = format!("{prefix}/{}", r.label);
            }
            r
        }));
    }
}
