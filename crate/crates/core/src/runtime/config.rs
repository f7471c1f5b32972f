//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::fixed::RingConfig;
use crate::ml::TrainingConfig;
use crate::mpc::{PartyId, SessionId};

pub const PROTOCOL_VERSION: u32 = 1;

/// Parsed `key = value` lines with their line numbers. Blank lines and
/// lines starting with `#` are skipped.
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<KvFile> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KvFile { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<KvFile> {
        KvFile::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Parses `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                msg: format!("bad value `{v}` for `{key}`"),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Fails on the first key not in `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("unknown key `{k}`"),
                });
            }
        }
        Ok(())
    }
}

/// Parses `"inf"` as no perturbation.
pub fn parse_epsilon(v: &str) -> Result<Option<f64>> {
    match v {
        "inf" | "none" | "off" => Ok(None),
        _ => v
            .parse::<f64>()
            .ok()
            .filter(|e| *e > 0.0)
            .map(Some)
            .ok_or_else(|| Error::InvalidConfig(format!("epsilon must be positive or `inf`, got `{v}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Party0,
    Party1,
    Dealer,
}

impl Role {
    pub fn party(self) -> Option<PartyId> {
        match self {
            Role::Party0 => Some(PartyId::P0),
            Role::Party1 => Some(PartyId::P1),
            Role::Dealer => None,
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Role> {
        match s {
            "party0" => Ok(Role::Party0),
            "party1" => Ok(Role::Party1),
            "dealer" => Ok(Role::Dealer),
            other => Err(Error::InvalidConfig(format!("unknown role `{other}`"))),
        }
    }
}

/// Everything one process needs to take part in a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub ring: RingConfig,
    pub session: SessionId,
    /// Public seed of the initial weights.
    pub seed: u64,
    /// Seed of the dealer's generator; only the dealer reads it.
    pub dealer_seed: u64,
    pub training: TrainingConfig,
    pub skip_norm: bool,
    pub epsilon: Option<f64>,
    /// Example count for the noise scale; defaults to the dataset rows.
    pub dp_n: Option<usize>,
    /// Party 0 listens here for party 1.
    pub party0_addr: String,
    pub dealer_addr: String,
    pub timeout: Duration,
    /// Share file prefixes, one per data owner.
    pub shares: Vec<PathBuf>,
    /// Weight share prefix read by the perturbation step.
    pub in_weights: Option<PathBuf>,
    pub out_weights: Option<PathBuf>,
    /// Independent perturbations drawn from one trained model.
    pub noise_runs: usize,
    pub report: Option<PathBuf>,
    /// Free-form description of the owner split, echoed in reports.
    pub partition: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            ring: RingConfig::default(),
            session: 1,
            seed: 0,
            dealer_seed: 0,
            training: TrainingConfig::default(),
            skip_norm: false,
            epsilon: None,
            dp_n: None,
            party0_addr: "127.0.0.1:7100".into(),
            dealer_addr: "127.0.0.1:7200".into(),
            timeout: Duration::from_secs(10),
            shares: Vec::new(),
            in_weights: None,
            out_weights: None,
            noise_runs: 1,
            report: None,
            partition: "horizontal:1".into(),
        }
    }
}

pub const SESSION_KEYS: &[&str] = &[
    "lambda",
    "frac_bits",
    "session",
    "seed",
    "dealer_seed",
    "epochs",
    "alpha",
    "lambda_reg",
    "momentum",
    "bias",
    "skip_norm",
    "epsilon",
    "n",
    "party0_addr",
    "dealer_addr",
    "timeout_ms",
    "shares",
    "in_weights",
    "out_weights",
    "noise_runs",
    "report",
    "partition",
];

impl SessionConfig {
    pub fn from_kv(kv: &KvFile) -> Result<SessionConfig> {
        kv.reject_unknown(SESSION_KEYS)?;
        let d = SessionConfig::default();
        let ring = RingConfig::new(
            kv.get_or("lambda", d.ring.lambda)?,
            kv.get_or("frac_bits", d.ring.frac_bits)?,
        )?;
        let training = TrainingConfig {
            alpha: kv.get_or("alpha", d.training.alpha)?,
            lambda_reg: kv.get_or("lambda_reg", d.training.lambda_reg)?,
            momentum: kv.get_or("momentum", d.training.momentum)?,
            epochs: kv.get_or("epochs", d.training.epochs)?,
            bias: kv.get_or("bias", d.training.bias)?,
        };
        training.validate()?;
        let epsilon = match kv.raw("epsilon") {
            Some(v) => parse_epsilon(v)?,
            None => None,
        };
        let shares = kv
            .raw("shares")
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(PathBuf::from)
                    .collect()
            })
            .unwrap_or_default();
        Ok(SessionConfig {
            ring,
            session: kv.get_or("session", d.session)?,
            seed: kv.get_or("seed", d.seed)?,
            dealer_seed: kv.get_or("dealer_seed", d.dealer_seed)?,
            training,
            skip_norm: kv.get_or("skip_norm", d.skip_norm)?,
            epsilon,
            dp_n: kv.get("n")?,
            party0_addr: kv.get_or("party0_addr", d.party0_addr)?,
            dealer_addr: kv.get_or("dealer_addr", d.dealer_addr)?,
            timeout: Duration::from_millis(kv.get_or("timeout_ms", d.timeout.as_millis() as u64)?),
            shares,
            in_weights: kv.get("in_weights")?,
            out_weights: kv.get("out_weights")?,
            noise_runs: kv.get_or("noise_runs", d.noise_runs)?,
            report: kv.get("report")?,
            partition: kv.get_or("partition", d.partition)?,
        })
    }

    pub fn parse(text: &str) -> Result<SessionConfig> {
        SessionConfig::from_kv(&KvFile::parse(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SessionConfig> {
        SessionConfig::from_kv(&KvFile::load(path)?)
    }

    /// The keys both computing parties must agree on, sorted by key.
    pub fn public_section(&self) -> Vec<(String, String)> {
        let t = &self.training;
        let mut v: Vec<(String, String)> = vec![
            ("protocol_version".into(), PROTOCOL_VERSION.to_string()),
            ("kernel_tables".into(), crate::math::approx::table_digest()),
            ("lambda".into(), self.ring.lambda.to_string()),
            ("frac_bits".into(), self.ring.frac_bits.to_string()),
            ("session".into(), self.session.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("epochs".into(), t.epochs.to_string()),
            ("alpha".into(), format!("{:?}", t.alpha)),
            ("lambda_reg".into(), format!("{:?}", t.lambda_reg)),
            ("momentum".into(), format!("{:?}", t.momentum)),
            ("bias".into(), t.bias.to_string()),
            ("skip_norm".into(), self.skip_norm.to_string()),
            (
                "epsilon".into(),
                self.epsilon.map(|e| format!("{e:?}")).unwrap_or_else(|| "inf".into()),
            ),
            (
                "n".into(),
                self.dp_n.map(|n| n.to_string()).unwrap_or_else(|| "auto".into()),
            ),
            ("partition".into(), self.partition.clone()),
            ("noise_runs".into(), self.noise_runs.to_string()),
        ];
        v.sort();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let c = SessionConfig::parse(
            "# comment\nlambda = 64\nfrac_bits = 16\nepochs = 5\nalpha=0.2\nepsilon = 1.5\nshares = a, b\nparty0_addr = 10.0.0.1:9000\n",
        )
        .unwrap();
        assert_eq!(c.ring.frac_bits, 16);
        assert_eq!(c.training.epochs, 5);
        assert_eq!(c.training.alpha, 0.2);
        assert_eq!(c.epsilon, Some(1.5));
        assert_eq!(c.shares, vec![PathBuf::from("a"), PathBuf::from("b")]);
        assert_eq!(c.party0_addr, "10.0.0.1:9000");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(SessionConfig::parse("lambda 64"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            SessionConfig::parse("epochs = 3\nbogus = 1"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(SessionConfig::parse("\nepochs = x"), Err(Error::Parse { line: 2, .. })));
        assert!(SessionConfig::parse("lambda = 48").is_err());
        assert!(SessionConfig::parse("epsilon = -1").is_err());
    }

    #[test]
    fn public_section_is_sorted_and_ignores_private_keys() {
        let a = SessionConfig::default();
        let b = SessionConfig {
            dealer_seed: 99,
            out_weights: Some("x".into()),
            ..SessionConfig::default()
        };
        assert_eq!(a.public_section(), b.public_section());
        let keys: Vec<_> = a.public_section().into_iter().map(|(k, _)| k).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
