//! Plaintext datasets: CSV loading, the synthetic generator, owner
//! partitions and accuracy evaluation.

use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A real-valued `n x m` feature matrix (row-major) with 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub n: usize,
    pub m: usize,
}

impl Dataset {
    pub fn new(x: Vec<f64>, t: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if x.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: x.len(),
            });
        }
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.len(),
            });
        }
        Ok(Dataset { x, t, n, m })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(rows.len() * self.m);
        for &i in rows {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            x,
            t: rows.iter().map(|&i| self.t[i]).collect(),
            n: rows.len(),
            m: self.m,
        }
    }

    /// Hex SHA-256 over the dimensions, features and labels.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.m as u64).to_le_bytes());
        for v in self.x.iter().chain(&self.t) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Fraction of labels equal to 1.
    pub fn base_rate(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.t.iter().sum::<f64>() / self.n as f64
    }
}

/// Reads a CSV file with a header row, real features and a final 0/1
/// label column. Line numbers in errors count the header as line 1.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| csv_error(e, 1))?;
    let cols = rdr.headers().map_err(|e| csv_error(e, 1))?.len();
    if cols < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "need at least one feature column and a label column".into(),
        });
    }
    let m = cols - 1;
    let mut x = Vec::new();
    let mut t = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != cols {
            return Err(Error::Parse {
                line,
                msg: format!("expected {cols} fields, found {}", rec.len()),
            });
        }
        for f in rec.iter().take(m) {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{f}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("`{f}` is not finite"),
                });
            }
            x.push(v);
        }
        let label = &rec[m];
        match label.parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => t.push(v),
            _ => {
                return Err(Error::LabelDomain {
                    line,
                    value: label.to_string(),
                })
            }
        }
    }
    let n = t.len();
    Dataset::new(x, t, n, m)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| csv_error(e, 0))?;
    let mut header: Vec<String> = (0..ds.m).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_error(e, 0))?;
    for i in 0..ds.n {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        rec.push((ds.t[i] as u8).to_string());
        w.write_record(&rec).map_err(|e| csv_error(e, 0))?;
    }
    w.flush()?;
    Ok(())
}

/// Features uniform on `{-1, +1}` and labels from a planted linear rule
/// `w . x >= 0` with Gaussian weights on the first `min(m, 5)` features.
///
/// Each label follows the rule with probability `separability` and is a
/// fair coin otherwise, so 1.0 gives a separable set and 0.0 labels that
/// ignore the features. Every row has norm `sqrt(m)`.
pub fn synth_data(n: usize, m: usize, seed: u64, separability: f64) -> Dataset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let support = m.min(5);
    let w: Vec<f64> = (0..support).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = Vec::with_capacity(n * m);
    let mut t = Vec::with_capacity(n);
    let sep = separability.clamp(0.0, 1.0);
    for _ in 0..n {
        let row: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let score: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
        let planted = if score >= 0.0 { 1.0 } else { 0.0 };
        let label = if rng.random_bool(sep) {
            planted
        } else if rng.random_bool(0.5) {
            1.0
        } else {
            0.0
        };
        x.extend(row);
        t.push(label);
    }
    Dataset { x, t, n, m }
}

/// Row-wise L2 normalization in floating point; zero rows stay zero.
pub fn normalize_rows(x: &[f64], m: usize) -> Vec<f64> {
    if m == 0 {
        return x.to_vec();
    }
    x.chunks(m)
        .flat_map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter()
                .map(move |v| if norm > 0.0 { v / norm } else { 0.0 })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Fraction of rows whose prediction `sigmoid(w . x) >= 0.5` matches the
/// label, after the same row normalization as training.
pub fn evaluate(weights: &[f64], test: &Dataset) -> Result<f64> {
    evaluate_with(weights, test, true)
}

pub fn evaluate_with(weights: &[f64], test: &Dataset, normalize: bool) -> Result<f64> {
    let bias = match weights.len() {
        d if d == test.m => false,
        d if d == test.m + 1 => true,
        d => {
            return Err(Error::DimensionMismatch {
                expected: test.m,
                got: d,
            })
        }
    };
    if test.n == 0 {
        return Ok(0.0);
    }
    let x = if normalize {
        normalize_rows(&test.x, test.m)
    } else {
        test.x.clone()
    };
    let mut correct = 0usize;
    for i in 0..test.n {
        let row = &x[i * test.m..(i + 1) * test.m];
        let mut z: f64 = row.iter().zip(weights).map(|(a, b)| a * b).sum();
        if bias {
            z += weights[test.m];
        }
        let pred = if z >= 0.0 { 1.0 } else { 0.0 };
        if pred == test.t[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    Horizontal,
    Vertical,
}

impl PartitionMode {
    pub fn name(&self) -> &'static str {
        match self {
            PartitionMode::Horizontal => "horizontal",
            PartitionMode::Vertical => "vertical",
        }
    }
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" | "h" => Ok(PartitionMode::Horizontal),
            "vertical" | "v" => Ok(PartitionMode::Vertical),
            other => Err(Error::PlanInvalid(format!("unknown partition mode `{other}`"))),
        }
    }
}

/// Assignment of row blocks (horizontal) or column blocks (vertical) to
/// owners. In vertical mode owner 0 also holds the labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub mode: PartitionMode,
    pub ranges: Vec<Range<usize>>,
}

impl PartitionPlan {
    /// `k` contiguous blocks whose sizes differ by at most one, larger
    /// blocks first.
    pub fn even(mode: PartitionMode, k: usize, total: usize) -> Result<Self> {
        if k == 0 || k > total {
            return Err(Error::PlanInvalid(format!(
                "cannot split {total} {} among {k} owners",
                match mode {
                    PartitionMode::Horizontal => "rows",
                    PartitionMode::Vertical => "columns",
                }
            )));
        }
        let base = total / k;
        let extra = total % k;
        let mut ranges = Vec::with_capacity(k);
        let mut at = 0;
        for i in 0..k {
            let len = base + usize::from(i < extra);
            ranges.push(at..at + len);
            at += len;
        }
        Ok(PartitionPlan { mode, ranges })
    }

    pub fn owners(&self) -> usize {
        self.ranges.len()
    }

    /// Checks that the ranges are disjoint, in order and cover `0..total`.
    pub fn validate(&self, total: usize) -> Result<()> {
        let mut at = 0;
        for r in &self.ranges {
            if r.start != at || r.end < r.start {
                return Err(Error::PlanInvalid(format!("range {r:?} does not start at {at}")));
            }
            at = r.end;
        }
        if at != total || self.ranges.is_empty() {
            return Err(Error::PlanInvalid(format!("ranges cover {at} of {total}")));
        }
        Ok(())
    }
}

/// One owner's block of the global dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnerData {
    pub owner: usize,
    pub rows: Range<usize>,
    pub columns: Range<usize>,
    /// `rows.len() x columns.len()`, row-major.
    pub x: Vec<f64>,
    /// Labels for `rows`; only the label holder has them.
    pub t: Option<Vec<f64>>,
}

impl OwnerData {
    pub fn dataset(&self) -> Result<Dataset> {
        let t = self.t.clone().ok_or(Error::VerticalUnsupported)?;
        Dataset::new(self.x.clone(), t, self.rows.len(), self.columns.len())
    }
}

pub fn partition(ds: &Dataset, plan: &PartitionPlan) -> Result<Vec<OwnerData>> {
    match plan.mode {
        PartitionMode::Horizontal => {
            plan.validate(ds.n)?;
            Ok(plan
                .ranges
                .iter()
                .enumerate()
                .map(|(owner, r)| OwnerData {
                    owner,
                    rows: r.clone(),
                    columns: 0..ds.m,
                    x: ds.x[r.start * ds.m..r.end * ds.m].to_vec(),
                    t: Some(ds.t[r.clone()].to_vec()),
                })
                .collect())
        }
        PartitionMode::Vertical => {
            plan.validate(ds.m)?;
            Ok(plan
                .ranges
                .iter()
                .enumerate()
                .map(|(owner, c)| OwnerData {
                    owner,
                    rows: 0..ds.n,
                    columns: c.clone(),
                    x: (0..ds.n).flat_map(|i| ds.row(i)[c.clone()].to_vec()).collect(),
                    t: (owner == 0).then(|| ds.t.clone()),
                })
                .collect())
        }
    }
}

/// Inverse of [`partition`].
pub fn reassemble(owners: &[OwnerData]) -> Result<Dataset> {
    let n = owners.iter().map(|o| o.rows.end).max().unwrap_or(0);
    let m = owners.iter().map(|o| o.columns.end).max().unwrap_or(0);
    let mut x = vec![0.0; n * m];
    let mut t = vec![f64::NAN; n];
    for o in owners {
        let w = o.columns.len();
        for (bi, i) in o.rows.clone().enumerate() {
            x[i * m + o.columns.start..i * m + o.columns.end]
                .copy_from_slice(&o.x[bi * w..(bi + 1) * w]);
        }
        if let Some(lab) = &o.t {
            t[o.rows.clone()].copy_from_slice(lab);
        }
    }
    if t.iter().any(|v| v.is_nan()) {
        return Err(Error::PlanInvalid("some rows have no labels".into()));
    }
    Dataset::new(x, t, n, m)
}

/// Stratified `k`-fold split: returns `(train, test)` row indices per fold.
/// Rows of each class are shuffled with `seed` and dealt round-robin.
pub fn stratified_folds(t: &[f64], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > t.len() {
        return Err(Error::PlanInvalid(format!("cannot make {k} folds of {} rows", t.len())));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; t.len()];
    let mut next = 0usize;
    for class in [0.0, 1.0] {
        let mut idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] == class).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        for i in idx {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let test: Vec<usize> = (0..t.len()).filter(|&i| fold_of[i] == f).collect();
            let train: Vec<usize> = (0..t.len()).filter(|&i| fold_of[i] != f).collect();
            (train, test)
        })
        .collect())
}
