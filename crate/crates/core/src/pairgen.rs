//! Better/worse pair construction for every supervision source: DA relative
//! ranking, cross-lingual NLI, reference discrimination and metric labels.
//!
//! Each builder emits one sample per unordered pair. Which side lands in T0
//! is drawn from a seeded stream per language pair so the ranker cannot
//! learn a positional shortcut.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{MetricScorer, ProviderError};
use crate::rng::{derive_seed, seeded, Rng};
use crate::types::{
    EvaluationSample, LangPair, NliRecord, Provenance, Relation, ScoreRecord, Segment, TypeError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PairGenError {
    #[error("score references unknown segment/system {segment_id}/{system_id}")]
    DanglingScore {
        segment_id: String,
        system_id: String,
    },
    #[error("duplicate score for {segment_id}/{system_id}")]
    DuplicateScore {
        segment_id: String,
        system_id: String,
    },
    #[error("segment {0} has no reference")]
    MissingReference(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Which NLI hypotheses count as the worse side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonEntailedPolicy {
    /// Neutral and contradiction hypotheses.
    #[default]
    AnyNonEntailed,
    ContradictionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGenConfig {
    /// Minimum DA gap in raw points for a DARR pair.
    pub darr_threshold: f64,
    pub max_pairs_per_segment: Option<usize>,
    pub rng_seed: u64,
    pub dev_sources_per_langpair: usize,
    pub nli_policy: NonEntailedPolicy,
}

impl Default for PairGenConfig {
    fn default() -> Self {
        Self {
            darr_threshold: 25.0,
            max_pairs_per_segment: None,
            rng_seed: 0,
            dev_sources_per_langpair: 50,
            nli_policy: NonEntailedPolicy::default(),
        }
    }
}

impl PairGenConfig {
    pub fn validate(&self) -> Result<(), PairGenError> {
        if !(self.darr_threshold.is_finite() && self.darr_threshold > 0.0) {
            return Err(PairGenError::InvalidConfig(format!(
                "darr_threshold must be > 0, got {}",
                self.darr_threshold
            )));
        }
        Ok(())
    }

    fn cap(&self, n: usize) -> usize {
        self.max_pairs_per_segment.map_or(n, |c| c.min(n))
    }
}

/// One orientation stream per language pair, derived from the config seed.
struct Orienter {
    seed: u64,
    tag: &'static str,
    streams: HashMap<LangPair, Rng>,
}

impl Orienter {
    fn new(seed: u64, tag: &'static str) -> Self {
        Self {
            seed,
            tag,
            streams: HashMap::new(),
        }
    }

    fn better_first(&mut self, lang: &LangPair) -> bool {
        let (seed, tag) = (self.seed, self.tag);
        self.streams
            .entry(lang.clone())
            .or_insert_with(|| seeded(derive_seed(seed, &format!("{tag}:{lang}"))))
            .gen_bool(0.5)
    }

    fn sample(
        &mut self,
        source: &str,
        better: &str,
        worse: &str,
        lang: &LangPair,
        provenance: Provenance,
    ) -> Result<EvaluationSample, TypeError> {
        let first = self.better_first(lang);
        EvaluationSample::from_preference(source, better, worse, first, lang.clone(), provenance)
    }
}

/// DA relative-ranking pairs: every unordered pair of systems on a segment
/// whose scores differ by at least `darr_threshold`; the higher score wins.
///
/// Scores must already be higher-is-better. Pairs of identical texts are
/// skipped.
pub fn build_darr_pairs(
    segments: &[Segment],
    scores: &[ScoreRecord],
    config: &PairGenConfig,
) -> Result<Vec<EvaluationSample>, PairGenError> {
    config.validate()?;
    let by_id: HashMap<&str, &Segment> = segments.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut per_segment: HashMap<&str, BTreeMap<&str, f64>> = HashMap::new();
    for rec in scores {
        let dangling = || PairGenError::DanglingScore {
            segment_id: rec.segment_id.clone(),
            system_id: rec.system_id.clone(),
        };
        let seg = by_id.get(rec.segment_id.as_str()).ok_or_else(dangling)?;
        if !seg.translations.contains_key(&rec.system_id) {
            return Err(dangling());
        }
        let slot = per_segment.entry(seg.id.as_str()).or_default();
        if slot.insert(rec.system_id.as_str(), rec.score).is_some() {
            return Err(PairGenError::DuplicateScore {
                segment_id: rec.segment_id.clone(),
                system_id: rec.system_id.clone(),
            });
        }
    }

    let mut orient = Orienter::new(config.rng_seed, "darr");
    let mut out = Vec::new();
    for seg in segments {
        let Some(sys_scores) = per_segment.get(seg.id.as_str()) else {
            continue;
        };
        let systems: Vec<(&str, f64)> = sys_scores.iter().map(|(k, v)| (*k, *v)).collect();
        let mut pairs = Vec::new();
        for (i, &(a, sa)) in systems.iter().enumerate() {
            for &(b, sb) in &systems[i + 1..] {
                if (sa - sb).abs() < config.darr_threshold {
                    continue;
                }
                let (better, worse) = if sa > sb { (a, b) } else { (b, a) };
                let (tb, tw) = (&seg.translations[better], &seg.translations[worse]);
                if tb != tw {
                    pairs.push((tb, tw));
                }
            }
        }
        pairs.truncate(config.cap(pairs.len()));
        for (better, worse) in pairs {
            out.push(orient.sample(&seg.source, better, worse, &seg.lang, Provenance::Darr)?);
        }
    }
    Ok(out)
}

/// Cross-lingual NLI pairs: an entailed hypothesis is a better translation of
/// the premise than a non-entailed one.
///
/// Records are grouped by (premise, premise language, hypothesis language);
/// each group yields the cross product entailed x non-entailed. Same-language
/// records are dropped.
pub fn build_nli_pairs(
    records: &[NliRecord],
    config: &PairGenConfig,
) -> Result<Vec<EvaluationSample>, PairGenError> {
    struct Group<'a> {
        premise: &'a str,
        lang: LangPair,
        entailed: Vec<&'a str>,
        other: Vec<&'a str>,
    }

    let mut order: Vec<Group<'_>> = Vec::new();
    let mut index: HashMap<(&str, &str, &str), usize> = HashMap::new();
    for r in records {
        if r.premise_lang == r.hypothesis_lang {
            continue;
        }
        let key = (
            r.premise.as_str(),
            r.premise_lang.as_str(),
            r.hypothesis_lang.as_str(),
        );
        let gi = match index.get(&key) {
            Some(i) => *i,
            None => {
                order.push(Group {
                    premise: &r.premise,
                    lang: LangPair::new(r.premise_lang.clone(), r.hypothesis_lang.clone())?,
                    entailed: Vec::new(),
                    other: Vec::new(),
                });
                index.insert(key, order.len() - 1);
                order.len() - 1
            }
        };
        let g = &mut order[gi];
        match (r.relation, config.nli_policy) {
            (Relation::Entailed, _) => g.entailed.push(&r.hypothesis),
            (Relation::Contradiction, _) | (Relation::Neutral, NonEntailedPolicy::AnyNonEntailed) => {
                g.other.push(&r.hypothesis)
            }
            (Relation::Neutral, NonEntailedPolicy::ContradictionOnly) => {}
        }
    }

    let mut orient = Orienter::new(config.rng_seed, "nli");
    let mut out = Vec::new();
    for g in &order {
        let mut pairs: Vec<(&str, &str)> = g
            .entailed
            .iter()
            .flat_map(|e| g.other.iter().map(move |o| (*e, *o)))
            .filter(|(e, o)| e != o)
            .collect();
        pairs.truncate(config.cap(pairs.len()));
        for (better, worse) in pairs {
            out.push(orient.sample(g.premise, better, worse, &g.lang, Provenance::Nli)?);
        }
    }
    Ok(out)
}

/// Reference-versus-MT pairs: the human reference is the better side.
/// Duplicate (source, reference, MT) combinations are emitted once.
pub fn build_ref_discrimination_pairs(
    segments: &[Segment],
    config: &PairGenConfig,
) -> Result<Vec<EvaluationSample>, PairGenError> {
    let mut orient = Orienter::new(config.rng_seed, "ref");
    let mut seen: HashSet<(&str, &str, &str)> = HashSet::new();
    let mut out = Vec::new();
    for seg in segments {
        let reference = seg
            .reference
            .as_deref()
            .ok_or_else(|| PairGenError::MissingReference(seg.id.clone()))?;
        let mut mts: Vec<&str> = seg
            .translations
            .values()
            .map(String::as_str)
            .filter(|mt| *mt != reference)
            .filter(|mt| seen.insert((seg.source.as_str(), reference, *mt)))
            .collect();
        mts.truncate(config.cap(mts.len()));
        for mt in mts {
            out.push(orient.sample(
                &seg.source,
                reference,
                mt,
                &seg.lang,
                Provenance::RefDiscrimination,
            )?);
        }
    }
    Ok(out)
}

/// Metric-labeled MT pairs: `M(S, R, Ta) > M(S, R, Tb)` makes Ta the better
/// side. Ties are skipped. The reference is used only for labeling and never
/// appears in a sample.
pub fn build_metric_labeled_pairs(
    segments: &[Segment],
    metric: &dyn MetricScorer,
    config: &PairGenConfig,
) -> Result<Vec<EvaluationSample>, PairGenError> {
    let mut orient = Orienter::new(config.rng_seed, "metric");
    let mut out = Vec::new();
    for seg in segments {
        let reference = seg
            .reference
            .as_deref()
            .ok_or_else(|| PairGenError::MissingReference(seg.id.clone()))?;
        let mut scored: Vec<(&str, f64)> = Vec::with_capacity(seg.translations.len());
        for mt in seg.translations.values() {
            let s = metric.score(&seg.source, Some(reference), mt)?;
            if !s.is_finite() {
                return Err(ProviderError::MalformedResponse(format!("non-finite score {s}")).into());
            }
            scored.push((mt, s));
        }
        let mut pairs = Vec::new();
        for (i, &(a, sa)) in scored.iter().enumerate() {
            for &(b, sb) in &scored[i + 1..] {
                if sa == sb || a == b {
                    continue;
                }
                pairs.push(if sa > sb { (a, b) } else { (b, a) });
            }
        }
        pairs.truncate(config.cap(pairs.len()));
        for (better, worse) in pairs {
            out.push(orient.sample(&seg.source, better, worse, &seg.lang, Provenance::MetricLabeled)?);
        }
    }
    Ok(out)
}

/// Holds out `min(dev_sources_per_langpair, available)` segments per language
/// pair. Both halves keep the input order.
pub fn split_dev(segments: &[Segment], config: &PairGenConfig) -> (Vec<Segment>, Vec<Segment>) {
    let mut by_lang: BTreeMap<&LangPair, Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        by_lang.entry(&s.lang).or_default().push(i);
    }
    let mut dev_idx = HashSet::new();
    for (lang, idx) in by_lang {
        let mut rng = seeded(derive_seed(config.rng_seed, &format!("dev:{lang}")));
        let k = config.dev_sources_per_langpair.min(idx.len());
        dev_idx.extend(idx.choose_multiple(&mut rng, k).copied());
    }
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (i, s) in segments.iter().enumerate() {
        if dev_idx.contains(&i) {
            dev.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    (train, dev)
}
