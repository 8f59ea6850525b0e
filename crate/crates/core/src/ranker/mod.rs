//! Pairwise rankers.
//!
//! A [`Ranker`] returns `p = P(T1 is better)`. The built-in [`RankerModel`]
//! is a logistic layer over feature differences:
//!
//! `p = sigmoid(w . (f(S, T1) - f(S, T0)))`
//!
//! Swapping T0 and T1 negates the difference vector exactly, so the model is
//! antisymmetric by construction. The bias is stored for checkpoint
//! compatibility but multiplies the order-symmetric constant 0.

pub mod features;
pub mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{MetricScorer, ProviderError};
use crate::types::{EvaluationSample, LangPair};
use features::{featurize_for, FeatureVector, FEATURE_NAMES, FEATURE_SCHEMA, N_FEATURES};

/// One pairwise query.
#[derive(Debug, Clone, Copy)]
pub struct RankItem<'a> {
    pub source: &'a str,
    pub t0: &'a str,
    pub t1: &'a str,
    pub lang: Option<&'a LangPair>,
    /// Only consulted by reference-based metric bridges.
    pub reference: Option<&'a str>,
}

impl<'a> RankItem<'a> {
    pub fn new(source: &'a str, t0: &'a str, t1: &'a str) -> Self {
        Self {
            source,
            t0,
            t1,
            lang: None,
            reference: None,
        }
    }

    pub fn from_sample(sample: &'a EvaluationSample) -> Self {
        Self {
            source: sample.source(),
            t0: sample.t0(),
            t1: sample.t1(),
            lang: Some(sample.lang()),
            reference: None,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            t0: self.t1,
            t1: self.t0,
            ..*self
        }
    }
}

pub trait Ranker: Sync {
    /// One probability per item, in order.
    fn rank_batch(&self, items: &[RankItem<'_>]) -> Result<Vec<f64>, ProviderError>;

    /// Whether `p(S, T0, T1) + p(S, T1, T0) = 1` holds exactly.
    fn is_antisymmetric(&self) -> bool {
        false
    }

    fn max_batch(&self) -> usize {
        usize::MAX
    }
}

/// Ranks `items` in chunks of at most `max_batch` (and at most 256).
/// Chunks run in parallel when the `parallel` feature is enabled; the output
/// order matches `items` either way.
pub fn rank_all(ranker: &dyn Ranker, items: &[RankItem<'_>]) -> Result<Vec<f64>, ProviderError> {
    let chunk = ranker.max_batch().clamp(1, 256);
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        items
            .par_chunks(chunk)
            .map(|c| ranker.rank_batch(c))
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<f64>> = items
        .chunks(chunk)
        .map(|c| ranker.rank_batch(c))
        .collect::<Result<_, _>>()?;
    let out: Vec<f64> = parts.into_iter().flatten().collect();
    if out.len() != items.len() {
        return Err(ProviderError::MalformedResponse(format!(
            "expected {} probabilities, got {}",
            items.len(),
            out.len()
        )));
    }
    Ok(out)
}

/// Mean `|p(S, T0, T1) + p(S, T1, T0) - 1|` over `items`.
pub fn antisymmetry_gap(ranker: &dyn Ranker, items: &[RankItem<'_>]) -> Result<f64, ProviderError> {
    if items.is_empty() {
        return Ok(0.0);
    }
    let fwd = rank_all(ranker, items)?;
    let swapped: Vec<RankItem<'_>> = items.iter().map(RankItem::swapped).collect();
    let rev = rank_all(ranker, &swapped)?;
    let gaps: Vec<f64> = fwd.iter().zip(&rev).map(|(a, b)| (a + b - 1.0).abs()).collect();
    Ok(crate::metaeval::pairwise_sum(&gaps) / gaps.len() as f64)
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("checkpoint has feature schema {found:?}, expected {expected:?}")]
    SchemaMismatch { expected: String, found: String },
    #[error("expected {expected} weights, got {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("non-finite weight")]
    NonFinite,
    #[error("bad checkpoint: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Default for RankerModel {
    fn default() -> Self {
        Self::zeros()
    }
}

impl RankerModel {
    pub fn zeros() -> Self {
        Self {
            weights: vec![0.0; N_FEATURES],
            bias: 0.0,
        }
    }

    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self, ModelError> {
        let m = Self { weights, bias };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.weights.len() != N_FEATURES {
            return Err(ModelError::WrongLength {
                expected: N_FEATURES,
                found: self.weights.len(),
            });
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    /// `w . delta`; the bias term is multiplied by zero.
    pub fn logit(&self, delta: &[f64; N_FEATURES]) -> f64 {
        self.weights.iter().zip(delta).map(|(w, d)| w * d).sum::<f64>() + self.bias * 0.0
    }

    pub fn predict_delta(&self, delta: &[f64; N_FEATURES]) -> f64 {
        sigmoid(self.logit(delta))
    }
}

/// `f(S, T1) - f(S, T0)`.
pub fn pair_delta(source: &str, t0: &str, t1: &str, lang: Option<&LangPair>) -> [f64; N_FEATURES] {
    let tgt = lang.map(LangPair::tgt);
    let f0: FeatureVector = featurize_for(source, t0, tgt);
    let f1: FeatureVector = featurize_for(source, t1, tgt);
    f1.minus(&f0)
}

/// P(T1 better) under the built-in model.
pub fn predict(model: &RankerModel, source: &str, t0: &str, t1: &str) -> f64 {
    model.predict_delta(&pair_delta(source, t0, t1, None))
}

/// As [`predict`], with the target language known.
pub fn predict_in(model: &RankerModel, lang: &LangPair, source: &str, t0: &str, t1: &str) -> f64 {
    model.predict_delta(&pair_delta(source, t0, t1, Some(lang)))
}

impl Ranker for RankerModel {
    fn rank_batch(&self, items: &[RankItem<'_>]) -> Result<Vec<f64>, ProviderError> {
        Ok(items
            .iter()
            .map(|it| self.predict_delta(&pair_delta(it.source, it.t0, it.t1, it.lang)))
            .collect())
    }

    fn is_antisymmetric(&self) -> bool {
        true
    }
}

/// A featurized training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub delta: [f64; N_FEATURES],
    pub label: f64,
    pub weight: f64,
}

impl PairFeatures {
    pub fn from_sample(sample: &EvaluationSample) -> Self {
        Self {
            delta: pair_delta(sample.source(), sample.t0(), sample.t1(), Some(sample.lang())),
            label: sample.label().as_f64(),
            weight: sample.weight(),
        }
    }
}

/// Weighted mean binary cross-entropy and its gradient with respect to the
/// weights. A batch whose weights sum to zero has zero loss and gradient.
pub fn loss_and_gradient_featurized(model: &RankerModel, batch: &[PairFeatures]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; N_FEATURES];
    let mut loss = 0.0;
    let mut total = 0.0;
    for p in batch {
        let z = model.logit(&p.delta);
        loss += p.weight * (softplus(z) - p.label * z);
        let r = p.weight * (sigmoid(z) - p.label);
        for (g, d) in grad.iter_mut().zip(&p.delta) {
            *g += r * d;
        }
        total += p.weight;
    }
    if total == 0.0 {
        return (0.0, vec![0.0; N_FEATURES]);
    }
    grad.iter_mut().for_each(|g| *g /= total);
    (loss / total, grad)
}

pub fn loss_and_gradient(model: &RankerModel, batch: &[EvaluationSample]) -> (f64, Vec<f64>) {
    let feats: Vec<PairFeatures> = batch.iter().map(PairFeatures::from_sample).collect();
    loss_and_gradient_featurized(model, &feats)
}

/// Bridges a pointwise quality metric to pairwise decisions:
/// `p = 1` if `M(T1) > M(T0)`, `0` if lower, `0.5` on a tie.
pub struct MetricRanker<M> {
    pub metric: M,
}

impl<M: MetricScorer> Ranker for MetricRanker<M> {
    fn rank_batch(&self, items: &[RankItem<'_>]) -> Result<Vec<f64>, ProviderError> {
        items
            .iter()
            .map(|it| {
                let s0 = self.metric.score(it.source, it.reference, it.t0)?;
                let s1 = self.metric.score(it.source, it.reference, it.t1)?;
                Ok(if s1 > s0 {
                    1.0
                } else if s1 < s0 {
                    0.0
                } else {
                    0.5
                })
            })
            .collect()
    }

    fn is_antisymmetric(&self) -> bool {
        true
    }
}

/// On-disk model: feature schema, weights, bias and how it was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: String,
    pub feature_schema: String,
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub provenance: train::TrainingProvenance,
}

impl Checkpoint {
    pub fn new(model: &RankerModel, provenance: train::TrainingProvenance) -> Self {
        Self {
            format_version: crate::ingest::FORMAT_VERSION.to_string(),
            feature_schema: FEATURE_SCHEMA.to_string(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights: model.weights.clone(),
            bias: model.bias,
            provenance,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.feature_schema != FEATURE_SCHEMA {
            return Err(ModelError::SchemaMismatch {
                expected: FEATURE_SCHEMA.into(),
                found: ck.feature_schema,
            });
        }
        ck.model()?;
        Ok(ck)
    }

    pub fn model(&self) -> Result<RankerModel, ModelError> {
        RankerModel::new(self.weights.clone(), self.bias)
    }
}

#[cfg(test)]
mod tests {
    use super::features::*;
    use super::*;
    use crate::rng::seeded;
    use crate::types::{Label, Provenance};
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn identical_candidates_give_half() {
        let m = RankerModel::new(vec![1.0, -2.0, 3.0, 0.5, 1.0, 2.0, -1.0], 4.0).unwrap();
        assert_eq!(predict(&m, "src", "same", "same"), 0.5);
    }

    #[test]
    fn zero_weights_give_half() {
        assert_eq!(predict(&RankerModel::zeros(), "a b", "c", "d e f"), 0.5);
    }

    #[test]
    fn unit_weight_on_one_feature() {
        let mut w = vec![0.0; N_FEATURES];
        w[TOKEN_RATIO] = 1.0;
        let m = RankerModel::new(w, 0.0).unwrap();
        // |S| = 1 token; T0 has 1 token, T1 has 3 -> token ratio delta +2.
        let p = predict(&m, "x", "a", "b c d");
        let oracle = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((p - oracle).abs() < 1e-15);
        assert!((p - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }

    fn sample(s: &str, a: &str, b: &str, y: Label) -> EvaluationSample {
        EvaluationSample::new(s, a, b, y, "de-en".parse().unwrap(), Provenance::Darr).unwrap()
    }

    #[test]
    fn loss_at_zero_weights_is_ln2() {
        let (l, _) = loss_and_gradient(&RankerModel::zeros(), &[sample("s", "a", "b c", Label::FirstBetter)]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn near_perfect_predictions_have_small_loss() {
        let mut w = vec![0.0; N_FEATURES];
        w[TOKEN_RATIO] = 60.0;
        let m = RankerModel::new(w, 0.0).unwrap();
        let batch = [
            sample("x", "a", "b c d", Label::SecondBetter),
            sample("x", "b c d", "a", Label::FirstBetter),
        ];
        let (l, g) = loss_and_gradient(&m, &batch);
        assert!(l < 1e-40, "{l}");
        assert!(g.iter().all(|v| v.abs() < 1e-40));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seeded(99);
        for _ in 0..50 {
            let w: Vec<f64> = (0..N_FEATURES).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let m = RankerModel::new(w, 0.0).unwrap();
            let batch: Vec<PairFeatures> = (0..8)
                .map(|_| PairFeatures {
                    delta: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
                    label: f64::from(rng.gen_range(0..2u8)),
                    weight: 1.0,
                })
                .collect();
            let (_, g) = loss_and_gradient_featurized(&m, &batch);
            for (k, gk) in g.iter().enumerate() {
                let h = 1e-5;
                let mut up = m.clone();
                up.weights[k] += h;
                let mut dn = m.clone();
                dn.weights[k] -= h;
                let fd = (loss_and_gradient_featurized(&up, &batch).0
                    - loss_and_gradient_featurized(&dn, &batch).0)
                    / (2.0 * h);
                let err = (fd - gk).abs() / fd.abs().max(gk.abs()).max(1e-8);
                assert!(err < 1e-4, "k={k} fd={fd} analytic={gk}");
            }
        }
    }

    #[test]
    fn metric_bridge_decisions() {
        use crate::provider::CharOverlapMetric;
        let r = MetricRanker { metric: CharOverlapMetric };
        let mut it = RankItem::new("s", "the dog", "the cat sat");
        it.reference = Some("the cat sat");
        let p = r.rank_batch(&[it, it.swapped(), RankItem { reference: Some("x"), ..RankItem::new("s", "a", "a") }]).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn checkpoint_round_trip_and_schema_check() {
        let m = RankerModel::new(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7], 0.0).unwrap();
        let ck = Checkpoint::new(&m, train::TrainingProvenance::default());
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back.model().unwrap(), m);
        let bad = ck.to_json().replace(FEATURE_SCHEMA, "other/v9");
        assert!(matches!(Checkpoint::from_json(&bad), Err(ModelError::SchemaMismatch { .. })));
        assert!(RankerModel::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn rank_all_preserves_order() {
        let mut w = vec![0.0; N_FEATURES];
        w[TOKEN_RATIO] = 1.0;
        let m = RankerModel::new(w, 0.0).unwrap();
        let texts: Vec<String> = (1..600).map(|n| vec!["w"; n % 7 + 1].join(" ")).collect();
        let items: Vec<RankItem<'_>> = texts.iter().map(|t| RankItem::new("x", "a", t)).collect();
        let batch = rank_all(&m, &items).unwrap();
        let serial: Vec<f64> = items.iter().map(|it| predict(&m, it.source, it.t0, it.t1)).collect();
        assert_eq!(batch, serial);
    }

    proptest! {
        #[test]
        fn antisymmetric(w in prop::collection::vec(-5.0f64..5.0, N_FEATURES), s in "\\PC{1,30}", a in "\\PC{1,30}", b in "\\PC{1,30}") {
            let m = RankerModel::new(w, 0.0).unwrap();
            let p = predict(&m, &s, &a, &b);
            let q = predict(&m, &s, &b, &a);
            prop_assert!((p + q - 1.0).abs() <= 1e-12);
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}
