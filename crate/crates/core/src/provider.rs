//! Capabilities the pipeline consumes from external models.
//!
//! HTTP clients live in the `mtrank-providers` crate; this module holds the
//! traits, the shared error type and a few deterministic stubs.

use std::collections::HashMap;

use thiserror::Error;

/// Literal mask sentinel sent to mask-fill providers.
pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("provider returned HTTP status {0}")]
    BadStatus(u16),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("text contains no {MASK_TOKEN} token")]
    NoMaskToken,
    #[error("text contains more than one {MASK_TOKEN} token")]
    MultipleMaskTokens,
    #[error("unsupported language pair {src}-{tgt}")]
    UnsupportedLanguagePair { src: String, tgt: String },
    #[error("batch of {len} exceeds max_batch {max}")]
    BatchTooLarge { len: usize, max: usize },
    #[error("{0}")]
    Unsupported(String),
}

impl ProviderError {
    /// Whether a retry may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Timeout | ProviderError::Transport(_) => true,
            ProviderError::BadStatus(code) => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Checks that `text` holds exactly one mask sentinel.
pub fn check_single_mask(text: &str) -> Result<(), ProviderError> {
    match text.matches(MASK_TOKEN).count() {
        0 => Err(ProviderError::NoMaskToken),
        1 => Ok(()),
        _ => Err(ProviderError::MultipleMaskTokens),
    }
}

/// Top-1 fill for a single `[MASK]`.
pub trait MaskFiller: Sync {
    fn fill(&self, text_with_mask: &str, lang: &str) -> Result<String, ProviderError>;
}

/// Deterministic (greedy) machine translation.
pub trait Translator: Sync {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, ProviderError>;
}

/// Reference-based quality score, higher is better. A `None` reference asks
/// a reference-free metric for its estimate.
pub trait MetricScorer: Sync {
    fn score(
        &self,
        source: &str,
        reference: Option<&str>,
        translation: &str,
    ) -> Result<f64, ProviderError>;
}

impl<F> MaskFiller for F
where
    F: Fn(&str, &str) -> Result<String, ProviderError> + Sync,
{
    fn fill(&self, text_with_mask: &str, lang: &str) -> Result<String, ProviderError> {
        self(text_with_mask, lang)
    }
}

/// Fills every mask with the same token.
#[derive(Debug, Clone)]
pub struct ConstantFill(pub String);

impl MaskFiller for ConstantFill {
    fn fill(&self, text_with_mask: &str, _lang: &str) -> Result<String, ProviderError> {
        check_single_mask(text_with_mask)?;
        Ok(self.0.clone())
    }
}

/// Returns its input unchanged for any language pair with `src != tgt`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, ProviderError> {
        if src == tgt {
            return Err(ProviderError::UnsupportedLanguagePair {
                src: src.into(),
                tgt: tgt.into(),
            });
        }
        Ok(text.to_string())
    }
}

/// Word-for-word dictionary translator. Unknown words pass through.
///
/// Registered pairs translate forward with the dictionary and backward with
/// its inverse; anything else is an unsupported pair.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTranslator {
    pairs: HashMap<(String, String), HashMap<String, String>>,
}

impl DictionaryTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_pair<'a>(
        mut self,
        src: &str,
        tgt: &str,
        entries: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        let fwd: HashMap<String, String> = entries
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let inv = fwd.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        self.pairs.insert((src.into(), tgt.into()), fwd);
        self.pairs.insert((tgt.into(), src.into()), inv);
        self
    }
}

impl Translator for DictionaryTranslator {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, ProviderError> {
        let dict = self
            .pairs
            .get(&(src.to_string(), tgt.to_string()))
            .ok_or_else(|| ProviderError::UnsupportedLanguagePair {
                src: src.into(),
                tgt: tgt.into(),
            })?;
        Ok(text
            .split_whitespace()
            .map(|w| dict.get(w).map(String::as_str).unwrap_or(w))
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Character 3-gram F1 between reference and translation. Without a
/// reference it compares against the source.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharOverlapMetric;

impl MetricScorer for CharOverlapMetric {
    fn score(
        &self,
        source: &str,
        reference: Option<&str>,
        translation: &str,
    ) -> Result<f64, ProviderError> {
        let against = reference.unwrap_or(source);
        Ok(char_ngram_f1(against, translation, 3))
    }
}

fn char_ngram_counts(text: &str, n: usize) -> HashMap<Vec<char>, usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut counts = HashMap::new();
    if chars.len() < n {
        if !chars.is_empty() {
            *counts.entry(chars).or_insert(0) += 1;
        }
        return counts;
    }
    for w in chars.windows(n) {
        *counts.entry(w.to_vec()).or_insert(0) += 1;
    }
    counts
}

/// Clipped character n-gram F1 in [0, 1].
pub fn char_ngram_f1(reference: &str, hypothesis: &str, n: usize) -> f64 {
    let r = char_ngram_counts(reference, n);
    let h = char_ngram_counts(hypothesis, n);
    let (r_total, h_total): (usize, usize) = (r.values().sum(), h.values().sum());
    if r_total == 0 || h_total == 0 {
        return 0.0;
    }
    let matched: usize = h
        .iter()
        .map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0)))
        .sum();
    if matched == 0 {
        return 0.0;
    }
    let precision = matched as f64 / h_total as f64;
    let recall = matched as f64 / r_total as f64;
    2.0 * precision * recall / (precision + recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_counting() {
        assert_eq!(check_single_mask("a b"), Err(ProviderError::NoMaskToken));
        assert_eq!(check_single_mask("a [MASK] b"), Ok(()));
        assert_eq!(
            check_single_mask("[MASK] [MASK]"),
            Err(ProviderError::MultipleMaskTokens)
        );
    }

    #[test]
    fn constant_fill_stub() {
        let f = ConstantFill("X".into());
        assert_eq!(f.fill("a [MASK]", "en").unwrap(), "X");
        assert_eq!(f.fill("a b", "en"), Err(ProviderError::NoMaskToken));
    }

    #[test]
    fn identity_translator() {
        assert_eq!(IdentityTranslator.translate("hi there", "en", "fr").unwrap(), "hi there");
        assert!(matches!(
            IdentityTranslator.translate("x", "en", "en"),
            Err(ProviderError::UnsupportedLanguagePair { .. })
        ));
    }

    #[test]
    fn inverse_dictionaries_round_trip() {
        let t = DictionaryTranslator::new().with_pair("en", "fr", [("cat", "chat"), ("the", "le")]);
        let fr = t.translate("the cat", "en", "fr").unwrap();
        assert_eq!(fr, "le chat");
        assert_eq!(t.translate(&fr, "fr", "en").unwrap(), "the cat");
        assert!(t.translate("x", "en", "de").is_err());
    }

    #[test]
    fn overlap_metric_extremes() {
        let m = CharOverlapMetric;
        assert_eq!(m.score("s", Some("the cat sat"), "the cat sat").unwrap(), 1.0);
        assert_eq!(m.score("s", Some("abcabc"), "xyzxyz").unwrap(), 0.0);
        let a = m.score("s", Some("the cat sat"), "the cat sits").unwrap();
        assert_eq!(a, m.score("s", Some("the cat sat"), "the cat sits").unwrap());
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn transient_classification() {
        assert!(ProviderError::Timeout.is_transient());
        assert!(ProviderError::BadStatus(503).is_transient());
        assert!(ProviderError::BadStatus(429).is_transient());
        assert!(!ProviderError::BadStatus(400).is_transient());
        assert!(!ProviderError::NoMaskToken.is_transient());
    }
}
