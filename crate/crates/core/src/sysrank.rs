//! System-level ranking from pairwise win probabilities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metaeval::{mean, pearson, MetaEvalError};
use crate::provider::ProviderError;
use crate::ranker::{rank_all, RankItem, Ranker};
use crate::types::Segment;

#[derive(Debug, Error)]
pub enum SysRankError {
    #[error("systems {0:?} and {1:?} share no segments")]
    NoSharedSegments(String, String),
    #[error("need at least {needed} systems, got {got}")]
    TooFewSystems { needed: usize, got: usize },
    #[error("only {0} systems overlap with the gold scores")]
    InsufficientOverlap(usize),
    #[error("duplicate system id {0:?}")]
    DuplicateSystem(String),
    #[error("matrix is {rows}x{cols} for {systems} systems")]
    Shape { rows: usize, cols: usize, systems: usize },
    #[error("matrix entry [{0}][{1}] is not a probability")]
    BadEntry(usize, usize),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    MetaEval(#[from] MetaEvalError),
}

/// How per-segment probabilities are pooled into a matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean of raw probabilities.
    #[default]
    Probability,
    /// Mean of per-segment wins (1, 0, or 0.5 for an exact tie).
    Binarized,
}

/// `p[i][j]` is the probability that system i beats system j.
/// The diagonal holds 0.5 and is never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub systems: Vec<String>,
    pub p: Vec<Vec<f64>>,
    /// Segments used for each unordered pair, keyed `[i][j]` with i < j.
    #[serde(default)]
    pub support: Vec<Vec<usize>>,
    /// Segments dropped for each pair because a system lacked a translation.
    #[serde(default)]
    pub dropped: Vec<Vec<usize>>,
}

impl WinMatrix {
    /// Builds a matrix from upper-triangle entries `p[i][j]` (i < j);
    /// the lower triangle is filled with complements.
    pub fn from_upper(systems: Vec<String>, upper: &BTreeMap<(usize, usize), f64>) -> Result<Self, SysRankError> {
        let n = systems.len();
        let mut p = vec![vec![0.5; n]; n];
        for (&(i, j), &v) in upper {
            if i >= n || j >= n || i == j {
                return Err(SysRankError::Shape { rows: i, cols: j, systems: n });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(SysRankError::BadEntry(i, j));
            }
            p[i][j] = v;
            p[j][i] = 1.0 - v;
        }
        Self::from_probabilities(systems, p)
    }

    pub fn from_probabilities(systems: Vec<String>, p: Vec<Vec<f64>>) -> Result<Self, SysRankError> {
        let n = systems.len();
        let mut seen = std::collections::BTreeSet::new();
        for s in &systems {
            if !seen.insert(s) {
                return Err(SysRankError::DuplicateSystem(s.clone()));
            }
        }
        if p.len() != n || p.iter().any(|r| r.len() != n) {
            return Err(SysRankError::Shape {
                rows: p.len(),
                cols: p.first().map_or(0, Vec::len),
                systems: n,
            });
        }
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j && !(0.0..=1.0).contains(v) {
                    return Err(SysRankError::BadEntry(i, j));
                }
            }
        }
        Ok(Self {
            systems,
            p,
            support: vec![vec![0; n]; n],
            dropped: vec![vec![0; n]; n],
        })
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }
}

fn pool(ps: &[f64], agg: Aggregation) -> f64 {
    let vals: Vec<f64> = match agg {
        Aggregation::Probability => ps.to_vec(),
        Aggregation::Binarized => ps
            .iter()
            .map(|&p| if p > 0.5 { 1.0 } else if p < 0.5 { 0.0 } else { 0.5 })
            .collect(),
    };
    mean(&vals).unwrap_or(0.5)
}

/// Queries `ranker` for every system pair on every segment both systems
/// translated. Segments missing either system are dropped for that pair
/// only. Rankers that are not exactly antisymmetric are queried in both
/// orientations and each direction is averaged separately.
pub fn build_win_matrix(
    ranker: &dyn Ranker,
    segments: &[Segment],
    systems: &[String],
    agg: Aggregation,
) -> Result<WinMatrix, SysRankError> {
    let n = systems.len();
    if n < 2 {
        return Err(SysRankError::TooFewSystems { needed: 2, got: n });
    }
    let both = !ranker.is_antisymmetric();
    let mut items = Vec::new();
    let mut spans = Vec::new();
    let mut support = vec![vec![0; n]; n];
    let mut dropped = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let start = items.len();
            for seg in segments {
                match (seg.translations.get(&systems[i]), seg.translations.get(&systems[j])) {
                    (Some(ti), Some(tj)) => {
                        let mut it = RankItem::new(&seg.source, tj, ti);
                        it.lang = Some(&seg.lang);
                        it.reference = seg.reference.as_deref();
                        items.push(it);
                        if both {
                            items.push(it.swapped());
                        }
                    }
                    _ => dropped[i][j] += 1,
                }
            }
            let count = (items.len() - start) / if both { 2 } else { 1 };
            if count == 0 {
                return Err(SysRankError::NoSharedSegments(systems[i].clone(), systems[j].clone()));
            }
            support[i][j] = count;
            support[j][i] = count;
            dropped[j][i] = dropped[i][j];
            spans.push((i, j, start, items.len()));
        }
    }
    let probs = rank_all(ranker, &items)?;
    let mut p = vec![vec![0.5; n]; n];
    for (i, j, start, end) in spans {
        let chunk = &probs[start..end];
        if both {
            let fwd: Vec<f64> = chunk.iter().step_by(2).copied().collect();
            let rev: Vec<f64> = chunk.iter().skip(1).step_by(2).copied().collect();
            p[i][j] = pool(&fwd, agg);
            p[j][i] = pool(&rev, agg);
        } else {
            p[i][j] = pool(chunk, agg);
            p[j][i] = 1.0 - p[i][j];
        }
    }
    let mut m = WinMatrix::from_probabilities(systems.to_vec(), p)?;
    m.support = support;
    m.dropped = dropped;
    Ok(m)
}

/// Every system id appearing in `segments`, sorted.
pub fn systems_in(segments: &[Segment]) -> Vec<String> {
    let set: std::collections::BTreeSet<&String> = segments.iter().flat_map(|s| s.translations.keys()).collect();
    set.into_iter().cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    pub score: f64,
}

/// Row means of the off-diagonal entries, best first. Ties go to the
/// lexicographically smaller id. Each row is summed in sorted order so the
/// result does not depend on system order.
pub fn system_scores(m: &WinMatrix) -> Vec<SystemScore> {
    let n = m.len();
    let mut out: Vec<SystemScore> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| m.p[i][j]).collect();
            row.sort_by(f64::total_cmp);
            SystemScore {
                system: m.systems[i].clone(),
                score: mean(&row).unwrap_or(0.5),
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.system.cmp(&b.system)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub inconsistent: usize,
    pub total: usize,
    pub percentage: f64,
    /// Cyclic triples as system ids, in matrix order.
    pub triples: Vec<[String; 3]>,
}

/// Counts 3-cycles among binarized decisions `p[i][j] > threshold`.
/// An entry equal to the threshold is no decision, so its triple cannot be
/// cyclic.
pub fn inconsistent_triples(m: &WinMatrix, threshold: f64) -> Result<Inconsistency, SysRankError> {
    let n = m.len();
    if n < 3 {
        return Err(SysRankError::TooFewSystems { needed: 3, got: n });
    }
    let beats = |i: usize, j: usize| m.p[i][j] > threshold;
    let mut triples = Vec::new();
    let mut total = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                total += 1;
                let cyc = (beats(i, j) && beats(j, k) && beats(k, i)) || (beats(j, i) && beats(k, j) && beats(i, k));
                if cyc {
                    triples.push([m.systems[i].clone(), m.systems[j].clone(), m.systems[k].clone()]);
                }
            }
        }
    }
    Ok(Inconsistency {
        inconsistent: triples.len(),
        total,
        percentage: 100.0 * triples.len() as f64 / total as f64,
        triples,
    })
}

/// Pearson correlation between system scores and gold scores over the
/// systems present in both.
pub fn system_pearson(scores: &[SystemScore], gold: &BTreeMap<String, f64>) -> Result<f64, SysRankError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .filter_map(|s| gold.get(&s.system).map(|g| (s.score, *g)))
        .unzip();
    if xs.len() < 2 {
        return Err(SysRankError::InsufficientOverlap(xs.len()));
    }
    Ok(pearson(&xs, &ys)?)
}

/// Text table: rows beat columns, with a trailing score column.
pub fn render_win_matrix(m: &WinMatrix) -> String {
    let n = m.len();
    let scores: BTreeMap<String, f64> = system_scores(m).into_iter().map(|s| (s.system, s.score)).collect();
    let w = m.systems.iter().map(String::len).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<w$}", "");
    for s in &m.systems {
        let _ = write!(out, " {s:>w$}");
    }
    let _ = writeln!(out, " {:>w$}", "Score");
    for i in 0..n {
        let _ = write!(out, "{:<w$}", m.systems[i]);
        for j in 0..n {
            if i == j {
                let _ = write!(out, " {:>w$}", "-");
            } else {
                let _ = write!(out, " {:>w$.4}", m.p[i][j]);
            }
        }
        let _ = writeln!(out, " {:>w$.4}", scores[&m.systems[i]]);
    }
    out
}
