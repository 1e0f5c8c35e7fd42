//! Pairwise architecture distances: measures over output matrices, zero-cost
//! encoding distances, and the random baseline matrix. All feed agglomerative
//! clustering, so every product is symmetric with a zero diagonal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{encode, enumerate, EncodingKind, SearchSpace, SpaceError};
use crate::space::DEFAULT_ENUMERATION_CAP;

/// Probability floor applied before log-based measures, with renormalization.
pub const PROB_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("degenerate distance matrix: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Distance measure between two output matrices, applied row-wise and averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Euclidean distance between rows.
    L2,
    /// Symmetrized KL divergence: half the sum of both directions.
    Kl,
    /// Symmetrized cross-entropy with self-entropies subtracted, so identical
    /// rows give zero.
    CrossEntropy,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::L2 => "l2",
            Measure::Kl => "kl",
            Measure::CrossEntropy => "cross_entropy",
        }
    }

    pub fn parse(s: &str) -> Option<Measure> {
        match s {
            "l2" => Some(Measure::L2),
            "kl" => Some(Measure::Kl),
            "cross_entropy" => Some(Measure::CrossEntropy),
            _ => None,
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative pairwise distances, stored condensed
/// (upper triangle, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    condensed: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from the upper triangle in (0,1),(0,2),..,(n-2,n-1) order.
    pub fn from_condensed(n: usize, condensed: Vec<f64>) -> Result<Self, DistanceError> {
        if n < 2 {
            return Err(DistanceError::Degenerate(format!("n={n} below 2")));
        }
        if condensed.len() != n * (n - 1) / 2 {
            return Err(DistanceError::Degenerate(format!(
                "condensed length {} does not match n={n}",
                condensed.len()
            )));
        }
        if condensed.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(DistanceError::Degenerate(
                "entries must be finite and nonnegative".into(),
            ));
        }
        Ok(DistanceMatrix { n, condensed })
    }

    /// Builds from a full square matrix, checking symmetry and zero diagonal.
    pub fn from_full(full: &[Vec<f64>]) -> Result<Self, DistanceError> {
        let n = full.len();
        if n < 2 || full.iter().any(|row| row.len() != n) {
            return Err(DistanceError::Degenerate("matrix is not square n>=2".into()));
        }
        for (i, row) in full.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(DistanceError::Degenerate(format!(
                    "nonzero diagonal at {i}"
                )));
            }
            for j in (i + 1)..n {
                if (row[j] - full[j][i]).abs() > 1e-12 {
                    return Err(DistanceError::Degenerate(format!(
                        "asymmetry at ({i},{j})"
                    )));
                }
            }
        }
        let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                condensed.push(full[i][j]);
            }
        }
        Self::from_condensed(n, condensed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else if i < j {
            self.condensed[self.offset(i, j)]
        } else {
            self.condensed[self.offset(j, i)]
        }
    }

    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    /// Row-major full-matrix JSON with size and measure metadata.
    pub fn to_json(&self, measure: &str) -> String {
        let mut values = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                values.push(self.get(i, j));
            }
        }
        let file = MatrixFile {
            n: self.n,
            measure: measure.to_string(),
            values,
        };
        serde_json::to_string(&file).expect("matrix serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<(Self, String), DistanceError> {
        let file: MatrixFile = serde_json::from_str(text)
            .map_err(|e| DistanceError::Degenerate(format!("malformed matrix JSON: {e}")))?;
        if file.values.len() != file.n * file.n {
            return Err(DistanceError::Degenerate(format!(
                "{} values for n={}",
                file.values.len(),
                file.n
            )));
        }
        let full: Vec<Vec<f64>> = file
            .values
            .chunks(file.n)
            .map(|row| row.to_vec())
            .collect();
        Ok((Self::from_full(&full)?, file.measure))
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    measure: String,
    values: Vec<f64>,
}

fn check_finite(m: &[Vec<f64>]) -> Result<(), DistanceError> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DistanceError::NonFinite);
    }
    Ok(())
}

/// Floors a probability row at `PROB_FLOOR` and renormalizes; also returns
/// elementwise ln for the log-based measures.
fn prepare_row(row: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let floored: Vec<f64> = row.iter().map(|&p| p.max(PROB_FLOOR)).collect();
    let sum: f64 = floored.iter().sum();
    let probs: Vec<f64> = floored.iter().map(|p| p / sum).collect();
    let lns = probs.iter().map(|p| p.ln()).collect();
    (probs, lns)
}

fn row_l2(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn row_sym_kl(p: &[f64], lnp: &[f64], q: &[f64], lnq: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..p.len() {
        acc += (p[k] - q[k]) * (lnp[k] - lnq[k]);
    }
    (acc / 2.0).max(0.0)
}

fn row_cross_entropy(p: &[f64], lnp: &[f64], q: &[f64], lnq: &[f64]) -> f64 {
    // 1/2 [H(p,q) + H(q,p)] - 1/2 [H(p,p) + H(q,q)], H(p,q) = -sum p ln q.
    let mut cross = 0.0;
    let mut self_terms = 0.0;
    for k in 0..p.len() {
        cross -= p[k] * lnq[k] + q[k] * lnp[k];
        self_terms -= p[k] * lnp[k] + q[k] * lnq[k];
    }
    ((cross - self_terms) / 2.0).max(0.0)
}

/// Prepared per-architecture rows so matrix construction floors and logs each
/// row once instead of once per pair.
enum Prepared {
    Plain(Vec<Vec<f64>>),
    WithLogs(Vec<(Vec<f64>, Vec<f64>)>),
}

fn prepare(outputs: &[Vec<f64>], measure: Measure) -> Prepared {
    match measure {
        Measure::L2 => Prepared::Plain(outputs.to_vec()),
        Measure::Kl | Measure::CrossEntropy => {
            Prepared::WithLogs(outputs.iter().map(|r| prepare_row(r)).collect())
        }
    }
}

fn prepared_distance(a: &Prepared, b: &Prepared, measure: Measure) -> f64 {
    match (a, b) {
        (Prepared::Plain(ra), Prepared::Plain(rb)) => {
            let total: f64 = ra.iter().zip(rb).map(|(p, q)| row_l2(p, q)).sum();
            total / ra.len() as f64
        }
        (Prepared::WithLogs(ra), Prepared::WithLogs(rb)) => {
            let total: f64 = ra
                .iter()
                .zip(rb)
                .map(|((p, lnp), (q, lnq))| match measure {
                    Measure::Kl => row_sym_kl(p, lnp, q, lnq),
                    Measure::CrossEntropy => row_cross_entropy(p, lnp, q, lnq),
                    Measure::L2 => unreachable!("plain variant handles l2"),
                })
                .sum();
            total / ra.len() as f64
        }
        _ => unreachable!("both sides prepared with the same measure"),
    }
}

/// Mean over row pairs of the chosen row distance between two B×C matrices.
pub fn output_distance(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    measure: Measure,
) -> Result<f64, DistanceError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(DistanceError::ShapeMismatch(format!(
            "{} vs {} rows",
            a.len(),
            b.len()
        )));
    }
    let cols = a[0].len();
    if a.iter().chain(b.iter()).any(|row| row.len() != cols) {
        return Err(DistanceError::ShapeMismatch("ragged rows".into()));
    }
    check_finite(a)?;
    check_finite(b)?;
    let pa = prepare(a, measure);
    let pb = prepare(b, measure);
    Ok(prepared_distance(&pa, &pb, measure))
}

/// Pairwise distance matrix over one output matrix per architecture.
pub fn build_matrix(
    outputs: &[Vec<Vec<f64>>],
    measure: Measure,
) -> Result<DistanceMatrix, DistanceError> {
    let n = outputs.len();
    if n < 2 {
        return Err(DistanceError::ShapeMismatch(format!(
            "need at least 2 output matrices, got {n}"
        )));
    }
    let rows = outputs[0].len();
    let cols = outputs[0].first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(DistanceError::ShapeMismatch("empty output matrix".into()));
    }
    for m in outputs {
        if m.len() != rows || m.iter().any(|r| r.len() != cols) {
            return Err(DistanceError::ShapeMismatch(
                "inconsistent output matrix shapes".into(),
            ));
        }
        check_finite(m)?;
    }
    let prepared: Vec<Prepared> = outputs.iter().map(|m| prepare(m, measure)).collect();
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            condensed.push(prepared_distance(&prepared[i], &prepared[j], measure));
        }
    }
    DistanceMatrix::from_condensed(n, condensed)
}

/// L2 distances between zero-cost encodings of every architecture pair.
pub fn encoding_matrix(
    space: &SearchSpace,
    kind: EncodingKind,
    weighted: bool,
) -> Result<DistanceMatrix, DistanceError> {
    let en = enumerate(space, DEFAULT_ENUMERATION_CAP)?;
    let encodings: Vec<Vec<f64>> = en
        .iter()
        .map(|a| encode(space, a, kind, weighted))
        .collect::<Result<_, _>>()?;
    let n = encodings.len();
    if n < 2 {
        return Err(DistanceError::Degenerate(format!(
            "space has {n} architectures, need at least 2"
        )));
    }
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            condensed.push(row_l2(&encodings[i], &encodings[j]));
        }
    }
    DistanceMatrix::from_condensed(n, condensed)
}

/// Baseline: i.i.d. uniform(0,1) upper triangle, mirrored.
pub fn random_matrix(n: usize, seed: u64) -> Result<DistanceMatrix, DistanceError> {
    if n < 2 {
        return Err(DistanceError::Degenerate(format!("n={n} below 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let condensed = (0..n * (n - 1) / 2).map(|_| rng.gen::<f64>()).collect();
    DistanceMatrix::from_condensed(n, condensed)
}
