//! Agreement between a ranker and human better/worse judgments.
//!
//! `tau = (concordant - discordant) / (concordant + discordant)` over judged
//! pairs, globally or averaged over groups, plus Pearson correlation and the
//! weighted ACES score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AcesCategory, EvaluationSample, Label};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetaEvalError {
    #[error("no judged pairs")]
    EmptyInput,
    #[error("every prediction was a tie and ties are skipped")]
    NoDecisions,
    #[error("judged pair {0} has no group key")]
    MissingGroupKey(usize),
    #[error("predicted probability {0} is not in [0, 1]")]
    BadProbability(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("category {0} has a weight but no tau")]
    MissingCategory(AcesCategory),
    #[error("invalid ACES weights: {0}")]
    InvalidWeights(String),
}

/// A gold label together with the ranker's P(T1 better).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedPair {
    pub label: Label,
    pub predicted_p: f64,
    pub group_key: Option<String>,
}

impl JudgedPair {
    pub fn new(label: Label, predicted_p: f64, group_key: Option<String>) -> Result<Self, MetaEvalError> {
        if !(predicted_p.is_finite() && (0.0..=1.0).contains(&predicted_p)) {
            return Err(MetaEvalError::BadProbability(predicted_p));
        }
        Ok(Self {
            label,
            predicted_p,
            group_key,
        })
    }

    pub fn from_sample(
        sample: &EvaluationSample,
        predicted_p: f64,
        group_key: Option<String>,
    ) -> Result<Self, MetaEvalError> {
        Self::new(sample.label(), predicted_p, group_key)
    }
}

/// What to do with predictions of exactly 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieMode {
    /// A non-decision counts against the metric.
    #[default]
    Discordant,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Global,
    PerGroupAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTau {
    pub key: String,
    pub concordant: usize,
    pub discordant: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub concordant: usize,
    pub discordant: usize,
    /// Ties dropped under [`TieMode::Skip`].
    pub skipped: usize,
    pub tau: f64,
    pub grouping: Grouping,
    /// Per-group breakdown, sorted by key. Empty for global reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupTau>,
}

enum Outcome {
    Concordant,
    Discordant,
    Skipped,
}

fn judge(pair: &JudgedPair, ties: TieMode) -> Outcome {
    let predicted = if pair.predicted_p > 0.5 {
        Label::SecondBetter
    } else if pair.predicted_p < 0.5 {
        Label::FirstBetter
    } else {
        return match ties {
            TieMode::Discordant => Outcome::Discordant,
            TieMode::Skip => Outcome::Skipped,
        };
    };
    if predicted == pair.label {
        Outcome::Concordant
    } else {
        Outcome::Discordant
    }
}

fn counts<'a>(
    judged: impl IntoIterator<Item = &'a JudgedPair>,
    ties: TieMode,
) -> (usize, usize, usize) {
    let (mut c, mut d, mut s) = (0, 0, 0);
    for p in judged {
        match judge(p, ties) {
            Outcome::Concordant => c += 1,
            Outcome::Discordant => d += 1,
            Outcome::Skipped => s += 1,
        }
    }
    (c, d, s)
}

fn tau_of(c: usize, d: usize) -> f64 {
    (c as f64 - d as f64) / (c + d) as f64
}

/// Global Kendall-like tau. The predicted winner is T1 iff `p > 0.5`.
pub fn kendall_like_tau(judged: &[JudgedPair], ties: TieMode) -> Result<TauReport, MetaEvalError> {
    if judged.is_empty() {
        return Err(MetaEvalError::EmptyInput);
    }
    let (concordant, discordant, skipped) = counts(judged, ties);
    if concordant + discordant == 0 {
        return Err(MetaEvalError::NoDecisions);
    }
    Ok(TauReport {
        concordant,
        discordant,
        skipped,
        tau: tau_of(concordant, discordant),
        grouping: Grouping::Global,
        groups: Vec::new(),
    })
}

/// Tau per group, then the unweighted mean over groups. Groups left without
/// any decision (all ties skipped) are excluded from the mean.
pub fn grouped_tau(judged: &[JudgedPair], ties: TieMode) -> Result<TauReport, MetaEvalError> {
    if judged.is_empty() {
        return Err(MetaEvalError::EmptyInput);
    }
    let mut groups: BTreeMap<&str, Vec<&JudgedPair>> = BTreeMap::new();
    for (i, p) in judged.iter().enumerate() {
        let key = p.group_key.as_deref().ok_or(MetaEvalError::MissingGroupKey(i))?;
        groups.entry(key).or_default().push(p);
    }
    let mut per_group = Vec::with_capacity(groups.len());
    let (mut tc, mut td, mut ts) = (0, 0, 0);
    for (key, members) in groups {
        let (c, d, s) = counts(members.iter().copied(), ties);
        ts += s;
        if c + d == 0 {
            continue;
        }
        tc += c;
        td += d;
        per_group.push(GroupTau {
            key: key.to_string(),
            concordant: c,
            discordant: d,
            tau: tau_of(c, d),
        });
    }
    if per_group.is_empty() {
        return Err(MetaEvalError::NoDecisions);
    }
    let taus: Vec<f64> = per_group.iter().map(|g| g.tau).collect();
    Ok(TauReport {
        concordant: tc,
        discordant: td,
        skipped: ts,
        tau: pairwise_sum(&taus) / taus.len() as f64,
        grouping: Grouping::PerGroupAveraged,
        groups: per_group,
    })
}

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| pairwise_sum(xs) / xs.len() as f64)
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetaEvalError> {
    if xs.len() != ys.len() {
        return Err(MetaEvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetaEvalError::TooFewPoints(xs.len()));
    }
    let mx = mean(xs).unwrap();
    let my = mean(ys).unwrap();
    let dx: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let dy: Vec<f64> = ys.iter().map(|y| y - my).collect();
    let sxy: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a * b).collect();
    let sxx: Vec<f64> = dx.iter().map(|a| a * a).collect();
    let syy: Vec<f64> = dy.iter().map(|b| b * b).collect();
    let (sxx, syy) = (pairwise_sum(&sxx), pairwise_sum(&syy));
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetaEvalError::ZeroVariance);
    }
    Ok((pairwise_sum(&sxy) / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Nonnegative per-category weights for the ACES score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcesWeights(BTreeMap<AcesCategory, f64>);

impl AcesWeights {
    pub fn new(weights: BTreeMap<AcesCategory, f64>) -> Result<Self, MetaEvalError> {
        if let Some((c, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(MetaEvalError::InvalidWeights(format!("{c}: {w}")));
        }
        if !weights.values().any(|w| *w > 0.0) {
            return Err(MetaEvalError::InvalidWeights("no positive weight".into()));
        }
        Ok(Self(weights))
    }

    pub fn uniform(weight: f64) -> Result<Self, MetaEvalError> {
        Self::new(AcesCategory::ALL.iter().map(|c| (*c, weight)).collect())
    }

    /// Parses a JSON object keyed by category code or name.
    pub fn from_json(text: &str) -> Result<Self, MetaEvalError> {
        let raw: BTreeMap<String, f64> =
            serde_json::from_str(text).map_err(|e| MetaEvalError::InvalidWeights(e.to_string()))?;
        let mut map = BTreeMap::new();
        for (k, v) in raw {
            let c: AcesCategory = k
                .parse()
                .map_err(|k| MetaEvalError::InvalidWeights(format!("unknown category {k:?}")))?;
            map.insert(c, v);
        }
        Self::new(map)
    }

    pub fn get(&self, c: AcesCategory) -> f64 {
        self.0.get(&c).copied().unwrap_or(0.0)
    }
}

impl<'de> Deserialize<'de> for AcesWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<AcesCategory, f64>::deserialize(d)?;
        AcesWeights::new(map).map_err(serde::de::Error::custom)
    }
}

/// `sum_c weights[c] * tau[c]` over categories with a positive weight.
pub fn aces_score(
    per_category_tau: &BTreeMap<AcesCategory, f64>,
    weights: &AcesWeights,
) -> Result<f64, MetaEvalError> {
    let mut terms = Vec::new();
    for c in AcesCategory::ALL {
        let w = weights.get(c);
        if w == 0.0 {
            continue;
        }
        let tau = per_category_tau
            .get(&c)
            .ok_or(MetaEvalError::MissingCategory(c))?;
        terms.push(w * tau);
    }
    Ok(pairwise_sum(&terms))
}

/// Global tau for each category present.
pub fn category_taus(
    judged: &[(AcesCategory, JudgedPair)],
    ties: TieMode,
) -> Result<BTreeMap<AcesCategory, TauReport>, MetaEvalError> {
    let mut by_cat: BTreeMap<AcesCategory, Vec<JudgedPair>> = BTreeMap::new();
    for (c, p) in judged {
        by_cat.entry(*c).or_default().push(p.clone());
    }
    by_cat
        .into_iter()
        .map(|(c, pairs)| kendall_like_tau(&pairs, ties).map(|r| (c, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(agree: usize, disagree: usize) -> Vec<JudgedPair> {
        let mut v = Vec::new();
        for _ in 0..agree {
            v.push(JudgedPair::new(Label::SecondBetter, 0.8, None).unwrap());
        }
        for _ in 0..disagree {
            v.push(JudgedPair::new(Label::FirstBetter, 0.8, None).unwrap());
        }
        v
    }

    #[test]
    fn tau_spot_values() {
        let t = |a, d| kendall_like_tau(&pairs(a, d), TieMode::Discordant).unwrap().tau;
        assert_eq!(t(10, 0), 1.0);
        assert_eq!(t(5, 5), 0.0);
        assert_eq!(t(7, 3), 0.4);
        assert_eq!(t(0, 4), -1.0);
    }

    #[test]
    fn ties() {
        let v = vec![
            JudgedPair::new(Label::FirstBetter, 0.5, None).unwrap(),
            JudgedPair::new(Label::FirstBetter, 0.2, None).unwrap(),
        ];
        let r = kendall_like_tau(&v, TieMode::Discordant).unwrap();
        assert_eq!((r.concordant, r.discordant, r.tau), (1, 1, 0.0));
        let r = kendall_like_tau(&v, TieMode::Skip).unwrap();
        assert_eq!((r.concordant, r.discordant, r.skipped, r.tau), (1, 0, 1, 1.0));
        assert_eq!(kendall_like_tau(&v[..1], TieMode::Skip), Err(MetaEvalError::NoDecisions));
        assert_eq!(kendall_like_tau(&[], TieMode::Skip), Err(MetaEvalError::EmptyInput));
    }

    #[test]
    fn bad_probabilities_rejected() {
        assert!(JudgedPair::new(Label::FirstBetter, 1.5, None).is_err());
        assert!(JudgedPair::new(Label::FirstBetter, f64::NAN, None).is_err());
    }

    fn keyed(v: Vec<JudgedPair>, key: &str) -> Vec<JudgedPair> {
        v.into_iter()
            .map(|mut p| {
                p.group_key = Some(key.to_string());
                p
            })
            .collect()
    }

    #[test]
    fn grouped_means() {
        let one = keyed(pairs(7, 3), "g");
        assert_eq!(
            grouped_tau(&one, TieMode::Discordant).unwrap().tau,
            kendall_like_tau(&one, TieMode::Discordant).unwrap().tau
        );

        let mut two = keyed(pairs(20, 0), "a");
        two.extend(keyed(pairs(1, 1), "b"));
        let r = grouped_tau(&two, TieMode::Discordant).unwrap();
        assert_eq!(r.tau, 0.5);
        assert_eq!(r.grouping, Grouping::PerGroupAveraged);

        let mut three = keyed(pairs(7, 3), "a");
        three.extend(keyed(pairs(4, 6), "b"));
        three.extend(keyed(pairs(9, 1), "c"));
        let r = grouped_tau(&three, TieMode::Discordant).unwrap();
        assert!((r.tau - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.groups.iter().map(|g| g.key.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);

        assert_eq!(grouped_tau(&pairs(1, 0), TieMode::Discordant), Err(MetaEvalError::MissingGroupKey(0)));
    }

    #[test]
    fn pearson_spot_values() {
        let xs = [1.0, 2.0, 3.0, 4.5];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
        // closed form: sxy = 5, sxx = 2, syy = 114/9
        let oracle = 5.0 / (2.0f64 * 114.0 / 9.0).sqrt();
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.99340).abs() < 1e-4);
        assert_eq!(pearson(&[1.0], &[1.0]), Err(MetaEvalError::TooFewPoints(1)));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(MetaEvalError::LengthMismatch(2, 1)));
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(MetaEvalError::ZeroVariance));
    }

    #[test]
    fn aces_weighting() {
        let w = AcesWeights::uniform(1.0).unwrap();
        let zeros: BTreeMap<_, _> = AcesCategory::ALL.iter().map(|c| (*c, 0.0)).collect();
        assert_eq!(aces_score(&zeros, &w).unwrap(), 0.0);
        let taus: BTreeMap<_, _> = AcesCategory::ALL
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i as f64 / 10.0))
            .collect();
        assert!((aces_score(&taus, &w).unwrap() - 4.5).abs() < 1e-12);
        let mut missing = taus.clone();
        missing.remove(&AcesCategory::P);
        assert_eq!(aces_score(&missing, &w), Err(MetaEvalError::MissingCategory(AcesCategory::P)));

        let only_a = AcesWeights::from_json(r#"{"addition": 2.0}"#).unwrap();
        assert!((aces_score(&missing, &only_a).unwrap() - 0.0).abs() < 1e-12);
        assert!(AcesWeights::from_json(r#"{"A": -1.0}"#).is_err());
        assert!(AcesWeights::from_json(r#"{"A": 0.0}"#).is_err());
        assert!(AcesWeights::from_json(r#"{"spelling": 1.0}"#).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
