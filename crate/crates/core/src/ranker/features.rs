//! Surface features of a (source, translation) pair.
//!
//! Seven dimensions, all finite for any input. The ranker consumes the
//! difference between the feature vectors of the two candidates.

use std::collections::HashSet;

pub const FEATURE_SCHEMA: &str = "mtrank-features/v1";
pub const N_FEATURES: usize = 7;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "token_ratio",
    "char3_overlap",
    "source_copy",
    "type_token_ratio",
    "repeated_bigram",
    "digit_punct_agreement",
    "out_of_script",
];

pub const TOKEN_RATIO: usize = 0;
pub const CHAR3_OVERLAP: usize = 1;
pub const SOURCE_COPY: usize = 2;
pub const TYPE_TOKEN_RATIO: usize = 3;
pub const REPEATED_BIGRAM: usize = 4;
pub const DIGIT_PUNCT_AGREEMENT: usize = 5;
pub const OUT_OF_SCRIPT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn minus(&self, other: &FeatureVector) -> [f64; N_FEATURES] {
        std::array::from_fn(|i| self.0[i] - other.0[i])
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        FEATURE_NAMES.iter().copied().zip(self.0.iter().copied())
    }
}

/// Features with the target script inferred from the translation itself.
pub fn featurize(source: &str, translation: &str) -> FeatureVector {
    featurize_for(source, translation, None)
}

/// Features for a known target language. The language code selects the
/// expected script for the out-of-script fraction.
pub fn featurize_for(source: &str, translation: &str, target_lang: Option<&str>) -> FeatureVector {
    let src_toks: Vec<String> = source.split_whitespace().map(str::to_lowercase).collect();
    let tgt_toks: Vec<String> = translation.split_whitespace().map(str::to_lowercase).collect();
    FeatureVector([
        tgt_toks.len() as f64 / src_toks.len().max(1) as f64,
        char_trigram_jaccard(source, translation),
        source_copy_fraction(source, translation),
        type_token_ratio(&tgt_toks),
        repeated_bigram_fraction(&tgt_toks),
        digit_punct_agreement(source, translation),
        out_of_script_fraction(translation, target_lang),
    ])
}

fn trigrams(text: &str) -> HashSet<Vec<char>> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    if chars.len() < 3 {
        return if chars.is_empty() {
            HashSet::new()
        } else {
            HashSet::from([chars])
        };
    }
    chars.windows(3).map(<[char]>::to_vec).collect()
}

/// Jaccard similarity of lowercased character 3-gram sets.
pub fn char_trigram_jaccard(a: &str, b: &str) -> f64 {
    let (ga, gb) = (trigrams(a), trigrams(b));
    let union = ga.union(&gb).count();
    if union == 0 {
        return 0.0;
    }
    ga.intersection(&gb).count() as f64 / union as f64
}

/// Longest common contiguous character span divided by the source length.
pub fn source_copy_fraction(source: &str, translation: &str) -> f64 {
    let s: Vec<char> = source.chars().collect();
    let t: Vec<char> = translation.chars().collect();
    if s.is_empty() {
        return 0.0;
    }
    let mut prev = vec![0usize; t.len() + 1];
    let mut cur = vec![0usize; t.len() + 1];
    let mut best = 0;
    for sc in &s {
        for (j, tc) in t.iter().enumerate() {
            cur[j + 1] = if sc == tc { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best as f64 / s.len() as f64
}

fn type_token_ratio(toks: &[String]) -> f64 {
    if toks.is_empty() {
        return 1.0;
    }
    let distinct: HashSet<&String> = toks.iter().collect();
    distinct.len() as f64 / toks.len() as f64
}

fn repeated_bigram_fraction(toks: &[String]) -> f64 {
    if toks.len() < 2 {
        return 0.0;
    }
    let bigrams: Vec<(&String, &String)> = toks.windows(2).map(|w| (&w[0], &w[1])).collect();
    let distinct: HashSet<&(&String, &String)> = bigrams.iter().collect();
    (bigrams.len() - distinct.len()) as f64 / bigrams.len() as f64
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{3001}' | '\u{3002}' | '\u{ff0c}' | '\u{ff01}' | '\u{ff1f}' | '\u{ff1a}' | '\u{ff1b}'
                | '\u{ab}' | '\u{bb}' | '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}'
                | '\u{201e}' | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{bf}' | '\u{a1}'
        )
}

fn count_agreement(a: usize, b: usize) -> f64 {
    1.0 - a.abs_diff(b) as f64 / a.max(b).max(1) as f64
}

/// Mean of digit-count and punctuation-count agreement, each in [0, 1].
pub fn digit_punct_agreement(source: &str, translation: &str) -> f64 {
    let digits = |t: &str| t.chars().filter(char::is_ascii_digit).count();
    let puncts = |t: &str| t.chars().filter(|c| is_punct(*c)).count();
    0.5 * (count_agreement(digits(source), digits(translation))
        + count_agreement(puncts(source), puncts(translation)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Script {
    Latin,
    Greek,
    Cyrillic,
    Armenian,
    Hebrew,
    Arabic,
    Devanagari,
    Bengali,
    Gurmukhi,
    Gujarati,
    Tamil,
    Telugu,
    Thai,
    Hangul,
    Kana,
    Han,
    Other,
}

pub fn script_of(c: char) -> Script {
    match c as u32 {
        0x41..=0x5a | 0x61..=0x7a | 0xc0..=0x24f | 0x1e00..=0x1eff => Script::Latin,
        0x370..=0x3ff | 0x1f00..=0x1fff => Script::Greek,
        0x400..=0x52f => Script::Cyrillic,
        0x530..=0x58f => Script::Armenian,
        0x590..=0x5ff => Script::Hebrew,
        0x600..=0x6ff | 0x750..=0x77f => Script::Arabic,
        0x900..=0x97f => Script::Devanagari,
        0x980..=0x9ff => Script::Bengali,
        0xa00..=0xa7f => Script::Gurmukhi,
        0xa80..=0xaff => Script::Gujarati,
        0xb80..=0xbff => Script::Tamil,
        0xc00..=0xc7f => Script::Telugu,
        0xe00..=0xe7f => Script::Thai,
        0x1100..=0x11ff | 0x3130..=0x318f | 0xac00..=0xd7af => Script::Hangul,
        0x3040..=0x30ff => Script::Kana,
        0x3400..=0x4dbf | 0x4e00..=0x9fff | 0xf900..=0xfaff => Script::Han,
        _ => Script::Other,
    }
}

/// Scripts a language is normally written in, for common ISO-639-1 codes.
pub fn scripts_for_lang(code: &str) -> Option<&'static [Script]> {
    use Script::*;
    Some(match code {
        "en" | "de" | "fr" | "cs" | "pl" | "fi" | "et" | "lt" | "lv" | "ro" | "tr" | "es" | "it"
        | "pt" | "nl" | "sv" | "da" | "no" | "nb" | "hu" | "hr" | "sl" | "sk" | "is" | "ga"
        | "eu" | "ca" | "gl" | "vi" | "id" | "ms" | "sw" | "ha" | "yo" | "zu" | "xh" | "af"
        | "sq" | "az" | "uz" | "so" | "tl" | "ig" | "mt" | "cy" | "lb" | "bs" => &[Latin],
        "ru" | "uk" | "be" | "bg" | "mk" | "kk" | "ky" | "mn" | "tg" => &[Cyrillic],
        "sr" => &[Cyrillic, Latin],
        "el" => &[Greek],
        "hy" => &[Armenian],
        "he" | "yi" => &[Hebrew],
        "ar" | "fa" | "ur" | "ps" => &[Arabic],
        "hi" | "mr" | "ne" => &[Devanagari],
        "bn" => &[Bengali],
        "pa" => &[Gurmukhi],
        "gu" => &[Gujarati],
        "ta" => &[Tamil],
        "te" => &[Telugu],
        "th" => &[Thai],
        "ko" => &[Hangul, Han],
        "ja" => &[Kana, Han],
        "zh" => &[Han],
        _ => return None,
    })
}

/// Fraction of letters outside the target script(s). Without a known target
/// language, the dominant script of the text is taken as the target.
pub fn out_of_script_fraction(text: &str, target_lang: Option<&str>) -> f64 {
    let letters: Vec<Script> = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .map(script_of)
        .collect();
    if letters.is_empty() {
        return 0.0;
    }
    let inside = match target_lang.and_then(scripts_for_lang) {
        Some(allowed) => letters.iter().filter(|s| allowed.contains(s)).count(),
        None => {
            let mut counts: Vec<(Script, usize)> = Vec::new();
            for s in &letters {
                match counts.iter_mut().find(|(k, _)| k == s) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((*s, 1)),
                }
            }
            counts.iter().map(|(_, n)| *n).max().unwrap_or(0)
        }
    };
    1.0 - inside as f64 / letters.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_copy_is_full() {
        let f = featurize("Der Hund bellt.", "Der Hund bellt.");
        assert_eq!(f.0[SOURCE_COPY], 1.0);
        assert_eq!(f.0[CHAR3_OVERLAP], 1.0);
        assert_eq!(f.0[TOKEN_RATIO], 1.0);
    }

    #[test]
    fn distinct_tokens_give_unit_ttr() {
        assert_eq!(featurize("x", "one two three four").0[TYPE_TOKEN_RATIO], 1.0);
        assert_eq!(featurize("x", "one one two two").0[TYPE_TOKEN_RATIO], 0.5);
    }

    #[test]
    fn trigram_overlap_extremes() {
        assert_eq!(char_trigram_jaccard("abcde", "abcde"), 1.0);
        assert_eq!(char_trigram_jaccard("abcde", "xyzuv"), 0.0);
    }

    #[test]
    fn repeated_bigrams() {
        let f = featurize("s", "a b a b a b");
        // bigrams: ab ba ab ba ab -> 5 total, 2 distinct
        assert!((f.0[REPEATED_BIGRAM] - 3.0 / 5.0).abs() < 1e-15);
        assert_eq!(featurize("s", "single").0[REPEATED_BIGRAM], 0.0);
    }

    #[test]
    fn digits_and_punctuation() {
        assert_eq!(digit_punct_agreement("In 1999, yes.", "Im Jahr 1999, ja."), 1.0);
        // digits 4 vs 0 -> 0; punctuation 2 vs 2 -> 1
        assert_eq!(digit_punct_agreement("In 1999, yes.", "Damals, ja."), 0.5);
        assert_eq!(digit_punct_agreement("abc", "def"), 1.0);
    }

    #[test]
    fn script_fraction() {
        assert_eq!(out_of_script_fraction("hello", Some("en")), 0.0);
        assert_eq!(out_of_script_fraction("привет", Some("en")), 1.0);
        assert!((out_of_script_fraction("ab вг", Some("en")) - 0.5).abs() < 1e-15);
        assert!((out_of_script_fraction("abc д", None) - 0.25).abs() < 1e-15);
        assert_eq!(out_of_script_fraction("1234", Some("en")), 0.0);
        assert_eq!(out_of_script_fraction("日本語です", Some("ja")), 0.0);
    }

    proptest! {
        #[test]
        fn features_are_finite(s in "\\PC{1,40}", t in "\\PC{1,40}", lang in prop::option::of("(en|ru|zh|xx)")) {
            let f = featurize_for(&s, &t, lang.as_deref());
            prop_assert!(f.0.iter().all(|v| v.is_finite()));
            prop_assert!(f.0[1..].iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
