//! Synthetic worse translations: word drop, mask-fill replacement,
//! round-trip translation through a pivot, and replacement after round trip.
//!
//! "Words" are whitespace-delimited tokens. Outputs are re-joined with single
//! spaces.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{MaskFiller, ProviderError, Translator, MASK_TOKEN};
use crate::rng::{derive_seed, seeded, Rng};
use crate::types::{swap_sample, EvaluationSample, LangPair, Label, Provenance, Segment, TypeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("text has no tokens")]
    EmptyAfterTokenize,
    #[error("rate must be in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("pivot language equals source language {0:?}")]
    PivotEqualsSource(String),
    #[error("perturbed text equals the original")]
    DegeneratePerturbation,
    #[error("provider returned an empty fill")]
    EmptyFill,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbKind {
    WordDrop,
    MlmReplace,
    Backtranslate,
    ReplaceAfterBacktranslate,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 4] = [
        PerturbKind::WordDrop,
        PerturbKind::MlmReplace,
        PerturbKind::Backtranslate,
        PerturbKind::ReplaceAfterBacktranslate,
    ];

    fn tag(self) -> &'static str {
        match self {
            PerturbKind::WordDrop => "word-drop",
            PerturbKind::MlmReplace => "mlm-replace",
            PerturbKind::Backtranslate => "backtranslate",
            PerturbKind::ReplaceAfterBacktranslate => "bt-replace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub drop_rate: f64,
    pub replace_rate: f64,
    pub pivot_lang: String,
    pub rng_seed: u64,
    /// Cap on perturbed source sentences per language pair.
    pub max_samples_per_langpair: usize,
    /// Cap on sentences sent through round-trip translation per language pair.
    pub backtranslation_subset: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            drop_rate: 0.15,
            replace_rate: 0.15,
            pivot_lang: "fr".to_string(),
            rng_seed: 0,
            max_samples_per_langpair: 25_000,
            backtranslation_subset: 50_000,
        }
    }
}

fn check_rate(rate: f64) -> Result<(), PerturbError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(PerturbError::InvalidRate(rate))
    }
}

fn tokens(text: &str) -> Result<Vec<&str>, PerturbError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.is_empty() {
        Err(PerturbError::EmptyAfterTokenize)
    } else {
        Ok(toks)
    }
}

/// Drops each token independently with probability `rate`. At least one
/// token survives: if all were dropped, one is restored at random.
///
/// One uniform draw is consumed per token, so the RNG advance depends only on
/// the token count.
pub fn word_drop(text: &str, rate: f64, rng: &mut Rng) -> Result<String, PerturbError> {
    check_rate(rate)?;
    let toks = tokens(text)?;
    let keep: Vec<bool> = toks.iter().map(|_| rng.gen::<f64>() >= rate).collect();
    if keep.iter().any(|k| *k) {
        Ok(toks
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(t, _)| *t)
            .collect::<Vec<_>>()
            .join(" "))
    } else {
        Ok(toks[rng.gen_range(0..toks.len())].to_string())
    }
}

/// Positions picked independently with probability `rate`.
pub fn select_positions(n_tokens: usize, rate: f64, rng: &mut Rng) -> Vec<usize> {
    (0..n_tokens).filter(|_| rng.gen::<f64>() < rate).collect()
}

/// Replaces the given token positions left to right, one mask per provider
/// call. Each call sees the replacements already made.
pub fn mlm_replace_at(
    text: &str,
    positions: &[usize],
    filler: &dyn MaskFiller,
    lang: &str,
) -> Result<String, PerturbError> {
    let mut toks: Vec<String> = tokens(text)?.into_iter().map(str::to_string).collect();
    let mut sorted: Vec<usize> = positions.iter().copied().filter(|p| *p < toks.len()).collect();
    sorted.sort_unstable();
    sorted.dedup();
    for pos in sorted {
        let original = std::mem::replace(&mut toks[pos], MASK_TOKEN.to_string());
        let masked = toks.join(" ");
        let fill = filler.fill(&masked, lang);
        match fill {
            Ok(f) if f.trim().is_empty() => return Err(PerturbError::EmptyFill),
            Ok(f) => toks[pos] = f.trim().to_string(),
            Err(e) => {
                toks[pos] = original;
                return Err(e.into());
            }
        }
    }
    Ok(toks.join(" "))
}

/// Masks roughly `rate` of the tokens and replaces each with the provider's
/// top fill. A fill equal to the original token is kept as is.
pub fn mlm_replace(
    text: &str,
    rate: f64,
    filler: &dyn MaskFiller,
    lang: &str,
    rng: &mut Rng,
) -> Result<String, PerturbError> {
    check_rate(rate)?;
    let n = tokens(text)?.len();
    let positions = select_positions(n, rate, rng);
    mlm_replace_at(text, &positions, filler, lang)
}

/// Round trip `lang -> pivot -> lang`.
pub fn backtranslate(
    text: &str,
    lang: &str,
    pivot: &str,
    translator: &dyn Translator,
) -> Result<String, PerturbError> {
    if pivot == lang {
        return Err(PerturbError::PivotEqualsSource(lang.to_string()));
    }
    let there = translator.translate(text, lang, pivot)?;
    Ok(translator.translate(&there, pivot, lang)?)
}

/// `mlm_replace(backtranslate(text))` with the configured pivot and rate.
pub fn replace_after_backtranslate(
    text: &str,
    lang: &str,
    config: &PerturbConfig,
    translator: &dyn Translator,
    filler: &dyn MaskFiller,
    rng: &mut Rng,
) -> Result<String, PerturbError> {
    let round_trip = backtranslate(text, lang, &config.pivot_lang, translator)?;
    mlm_replace(&round_trip, config.replace_rate, filler, lang, rng)
}

/// The two labeled orderings `(S, (T, P(T)), 0)` and `(S, (P(T), T), 1)`.
pub fn make_perturbation_samples(
    source: &str,
    original: &str,
    perturbed: &str,
    lang: &LangPair,
) -> Result<[EvaluationSample; 2], PerturbError> {
    if original == perturbed {
        return Err(PerturbError::DegeneratePerturbation);
    }
    let first = EvaluationSample::new(
        source,
        original,
        perturbed,
        Label::FirstBetter,
        lang.clone(),
        Provenance::Perturbation,
    )?;
    let second = swap_sample(&first);
    Ok([first, second])
}

/// Providers needed by the model-backed perturbations. Word drop needs none.
#[derive(Clone, Copy, Default)]
pub struct PerturbProviders<'a> {
    pub filler: Option<&'a dyn MaskFiller>,
    pub translator: Option<&'a dyn Translator>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerturbOutput {
    pub samples: Vec<EvaluationSample>,
    /// Perturbations that reproduced the original text.
    pub degenerate: usize,
    /// Segments skipped because they carry no reference.
    pub missing_reference: usize,
}

/// Applies one perturbation to the reference translation of each segment,
/// capped per language pair, and wraps the results as sample pairs.
///
/// Each segment gets its own RNG stream derived from the seed, the
/// perturbation kind and the segment id, so results do not depend on corpus
/// order or on which other segments are present.
pub fn perturb_corpus(
    segments: &[Segment],
    kind: PerturbKind,
    config: &PerturbConfig,
    providers: PerturbProviders<'_>,
) -> Result<PerturbOutput, PerturbError> {
    let need = |what: &str| ProviderError::Unsupported(format!("{} requires a {what} provider", kind.tag()));
    let filler = match kind {
        PerturbKind::MlmReplace | PerturbKind::ReplaceAfterBacktranslate => {
            Some(providers.filler.ok_or_else(|| need("mask-fill"))?)
        }
        _ => None,
    };
    let translator = match kind {
        PerturbKind::Backtranslate | PerturbKind::ReplaceAfterBacktranslate => {
            Some(providers.translator.ok_or_else(|| need("translation"))?)
        }
        _ => None,
    };
    let cap = match kind {
        PerturbKind::Backtranslate | PerturbKind::ReplaceAfterBacktranslate => config
            .max_samples_per_langpair
            .min(config.backtranslation_subset),
        _ => config.max_samples_per_langpair,
    };

    let mut out = PerturbOutput::default();
    let mut used: BTreeMap<&LangPair, usize> = BTreeMap::new();
    for seg in segments {
        let Some(reference) = seg.reference.as_deref() else {
            out.missing_reference += 1;
            continue;
        };
        let count = used.entry(&seg.lang).or_insert(0);
        if *count >= cap {
            continue;
        }
        *count += 1;
        let mut rng = seeded(derive_seed(config.rng_seed, &format!("{}:{}", kind.tag(), seg.id)));
        let tgt = seg.lang.tgt();
        let perturbed = match kind {
            PerturbKind::WordDrop => word_drop(reference, config.drop_rate, &mut rng)?,
            PerturbKind::MlmReplace => {
                mlm_replace(reference, config.replace_rate, filler.unwrap(), tgt, &mut rng)?
            }
            PerturbKind::Backtranslate => {
                backtranslate(reference, tgt, &config.pivot_lang, translator.unwrap())?
            }
            PerturbKind::ReplaceAfterBacktranslate => replace_after_backtranslate(
                reference,
                tgt,
                config,
                translator.unwrap(),
                filler.unwrap(),
                &mut rng,
            )?,
        };
        match make_perturbation_samples(&seg.source, reference, &perturbed, &seg.lang) {
            Ok(pair) => out.samples.extend(pair),
            Err(PerturbError::DegeneratePerturbation) => out.degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
