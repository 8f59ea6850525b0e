//! Shared domain types and the canonical single-text form of a sample.
//!
//! All types here are immutable once built. Constructors validate the
//! invariants, so any value that exists is well formed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("language code must be non-empty: {0:?}")]
    BadLangPair(String),
    #[error("field `{0}` must be non-empty")]
    EmptyField(&'static str),
    #[error("t0 and t1 must differ")]
    IdenticalTranslations,
    #[error("label must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("weight must be finite and nonnegative, got {0}")]
    BadWeight(f64),
    #[error("good and bad translations must differ")]
    GoodEqualsBad,
}

/// Source/target language pair written as `src-tgt`, e.g. `de-en`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangPair {
    src: String,
    tgt: String,
}

impl LangPair {
    pub fn new(src: impl Into<String>, tgt: impl Into<String>) -> Result<Self, TypeError> {
        let (src, tgt) = (src.into(), tgt.into());
        if src.trim().is_empty() || tgt.trim().is_empty() || src.contains('-') || tgt.contains('-') {
            return Err(TypeError::BadLangPair(format!("{src}-{tgt}")));
        }
        Ok(Self { src, tgt })
    }

    pub fn src(&self) -> &str {
        &self.src
    }

    pub fn tgt(&self) -> &str {
        &self.tgt
    }

    pub fn is_cross_lingual(&self) -> bool {
        self.src != self.tgt
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

impl FromStr for LangPair {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('-') {
            Some((src, tgt)) => LangPair::new(src, tgt),
            None => Err(TypeError::BadLangPair(s.to_string())),
        }
    }
}

impl TryFrom<String> for LangPair {
    type Error = TypeError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<LangPair> for String {
    fn from(value: LangPair) -> Self {
        value.to_string()
    }
}

/// One source sentence with its optional reference and per-system outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub lang: LangPair,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// System id to translation text. Ordered so iteration is deterministic.
    pub translations: BTreeMap<String, String>,
}

impl Segment {
    pub fn new(
        id: impl Into<String>,
        lang: LangPair,
        source: impl Into<String>,
        reference: Option<String>,
        translations: BTreeMap<String, String>,
    ) -> Result<Self, TypeError> {
        let seg = Self {
            id: id.into(),
            lang,
            source: source.into(),
            reference,
            translations,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        if self.id.is_empty() {
            return Err(TypeError::EmptyField("id"));
        }
        if self.source.trim().is_empty() {
            return Err(TypeError::EmptyField("source"));
        }
        if matches!(&self.reference, Some(r) if r.trim().is_empty()) {
            return Err(TypeError::EmptyField("reference"));
        }
        if self.translations.values().any(|t| t.trim().is_empty()) {
            return Err(TypeError::EmptyField("translations"));
        }
        Ok(())
    }
}

/// Gold label of a sample: which side of the pair is the better translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    /// y = 0: T0 is better.
    FirstBetter,
    /// y = 1: T1 is better.
    SecondBetter,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::FirstBetter => 0,
            Label::SecondBetter => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::FirstBetter => Label::SecondBetter,
            Label::SecondBetter => Label::FirstBetter,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = TypeError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::FirstBetter),
            1 => Ok(Label::SecondBetter),
            other => Err(TypeError::BadLabel(other)),
        }
    }
}

impl From<Label> for u8 {
    fn from(value: Label) -> Self {
        value.as_u8()
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "NLI")]
    Nli,
    RefDiscrimination,
    MetricLabeled,
    Perturbation,
    #[serde(rename = "DARR")]
    Darr,
    Challenge,
}

/// A `(S, (T0, T1), y)` training or evaluation triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample")]
pub struct EvaluationSample {
    source: String,
    t0: String,
    t1: String,
    label: Label,
    lang: LangPair,
    provenance: Provenance,
    weight: f64,
}

#[derive(Deserialize)]
struct RawSample {
    source: String,
    t0: String,
    t1: String,
    label: Label,
    lang: LangPair,
    provenance: Provenance,
    #[serde(default = "default_weight")]
    weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl TryFrom<RawSample> for EvaluationSample {
    type Error = TypeError;

    fn try_from(raw: RawSample) -> Result<Self, Self::Error> {
        EvaluationSample::new(raw.source, raw.t0, raw.t1, raw.label, raw.lang, raw.provenance)?
            .with_weight(raw.weight)
    }
}

impl EvaluationSample {
    pub fn new(
        source: impl Into<String>,
        t0: impl Into<String>,
        t1: impl Into<String>,
        label: Label,
        lang: LangPair,
        provenance: Provenance,
    ) -> Result<Self, TypeError> {
        let (source, t0, t1) = (source.into(), t0.into(), t1.into());
        if source.trim().is_empty() {
            return Err(TypeError::EmptyField("source"));
        }
        if t0.trim().is_empty() {
            return Err(TypeError::EmptyField("t0"));
        }
        if t1.trim().is_empty() {
            return Err(TypeError::EmptyField("t1"));
        }
        if t0 == t1 {
            return Err(TypeError::IdenticalTranslations);
        }
        Ok(Self {
            source,
            t0,
            t1,
            label,
            lang,
            provenance,
            weight: 1.0,
        })
    }

    /// Builds a sample from a better/worse pair, putting the better side at
    /// T0 when `better_first` is set.
    pub fn from_preference(
        source: impl Into<String>,
        better: impl Into<String>,
        worse: impl Into<String>,
        better_first: bool,
        lang: LangPair,
        provenance: Provenance,
    ) -> Result<Self, TypeError> {
        let (better, worse) = (better.into(), worse.into());
        if better_first {
            Self::new(source, better, worse, Label::FirstBetter, lang, provenance)
        } else {
            Self::new(source, worse, better, Label::SecondBetter, lang, provenance)
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self, TypeError> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(TypeError::BadWeight(weight));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn t0(&self) -> &str {
        &self.t0
    }

    pub fn t1(&self) -> &str {
        &self.t1
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn lang(&self) -> &LangPair {
        &self.lang
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn better(&self) -> &str {
        match self.label {
            Label::FirstBetter => &self.t0,
            Label::SecondBetter => &self.t1,
        }
    }

    pub fn worse(&self) -> &str {
        match self.label {
            Label::FirstBetter => &self.t1,
            Label::SecondBetter => &self.t0,
        }
    }
}

const SOURCE_TAG: &str = "Source:";
const T0_TAG: &str = "Translation 0:";
const T1_TAG: &str = "Translation 1:";

/// Single-text model input: `Source: {S} Translation 0: {T0} Translation 1: {T1}`.
///
/// The label is not part of the text.
pub fn serialize_sample(sample: &EvaluationSample) -> String {
    serialize_texts(&sample.source, &sample.t0, &sample.t1)
}

pub fn serialize_texts(source: &str, t0: &str, t1: &str) -> String {
    format!("{SOURCE_TAG} {source} {T0_TAG} {t0} {T1_TAG} {t1}")
}

/// Splits a serialized sample back into `(S, T0, T1)`. Only unambiguous when
/// none of the fields contains a template token.
pub fn split_serialized(text: &str) -> Option<(&str, &str, &str)> {
    let rest = text.strip_prefix(SOURCE_TAG)?.strip_prefix(' ')?;
    let (source, rest) = rest.split_once(&format!(" {T0_TAG} "))?;
    let (t0, t1) = rest.split_once(&format!(" {T1_TAG} "))?;
    Some((source, t0, t1))
}

/// Exchanges T0 and T1 and flips the label. Everything else is preserved.
pub fn swap_sample(sample: &EvaluationSample) -> EvaluationSample {
    EvaluationSample {
        source: sample.source.clone(),
        t0: sample.t1.clone(),
        t1: sample.t0.clone(),
        label: sample.label.flipped(),
        lang: sample.lang.clone(),
        provenance: sample.provenance,
        weight: sample.weight,
    }
}

/// Human score scheme of a score file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreScheme {
    #[serde(rename = "DA_raw")]
    DaRaw,
    #[serde(rename = "DA_z")]
    DaZ,
    #[serde(rename = "MQM")]
    Mqm,
}

/// One human judgment, always stored higher-is-better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub segment_id: String,
    pub system_id: String,
    pub score: f64,
    pub scheme: ScoreScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "entailment")]
    Entailed,
    #[serde(rename = "neutral")]
    Neutral,
    #[serde(rename = "contradiction")]
    Contradiction,
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "entailed" => Ok(Relation::Entailed),
            "neutral" => Ok(Relation::Neutral),
            "contradiction" => Ok(Relation::Contradiction),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRecord {
    pub premise: String,
    pub premise_lang: String,
    pub hypothesis: String,
    pub hypothesis_lang: String,
    pub relation: Relation,
}

/// The ten ACES error categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AcesCategory {
    A,
    O,
    M,
    U,
    #[serde(rename = "DNT")]
    Dnt,
    Ov,
    Un,
    #[serde(rename = "RWK")]
    Rwk,
    #[serde(rename = "WL")]
    Wl,
    P,
}

impl AcesCategory {
    pub const ALL: [AcesCategory; 10] = [
        AcesCategory::A,
        AcesCategory::O,
        AcesCategory::M,
        AcesCategory::U,
        AcesCategory::Dnt,
        AcesCategory::Ov,
        AcesCategory::Un,
        AcesCategory::Rwk,
        AcesCategory::Wl,
        AcesCategory::P,
    ];

    pub fn code(self) -> &'static str {
        match self {
            AcesCategory::A => "A",
            AcesCategory::O => "O",
            AcesCategory::M => "M",
            AcesCategory::U => "U",
            AcesCategory::Dnt => "DNT",
            AcesCategory::Ov => "Ov",
            AcesCategory::Un => "Un",
            AcesCategory::Rwk => "RWK",
            AcesCategory::Wl => "WL",
            AcesCategory::P => "P",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AcesCategory::A => "addition",
            AcesCategory::O => "omission",
            AcesCategory::M => "mistranslation",
            AcesCategory::U => "untranslated",
            AcesCategory::Dnt => "do-not-translate",
            AcesCategory::Ov => "overtranslation",
            AcesCategory::Un => "undertranslation",
            AcesCategory::Rwk => "real-world-knowledge",
            AcesCategory::Wl => "wrong-language",
            AcesCategory::P => "punctuation",
        }
    }
}

impl fmt::Display for AcesCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AcesCategory {
    type Err = String;

    /// Accepts either the short code (`DNT`) or the long name
    /// (`do-not-translate`, `do_not_translate`, `Do Not Translate`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if let Some(c) = AcesCategory::ALL.iter().find(|c| c.code() == trimmed) {
            return Ok(*c);
        }
        let norm: String = trimmed
            .to_lowercase()
            .chars()
            .map(|c| if c == '_' || c == ' ' { '-' } else { c })
            .collect();
        AcesCategory::ALL
            .iter()
            .find(|c| c.name() == norm || c.code().to_lowercase() == norm)
            .copied()
            .ok_or_else(|| s.to_string())
    }
}

/// A good/bad translation pair probing one error phenomenon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeExample {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub good: String,
    pub bad: String,
    pub phenomenon: String,
    pub category: AcesCategory,
    pub lang: LangPair,
}

impl ChallengeExample {
    pub fn validate(&self) -> Result<(), TypeError> {
        if self.source.trim().is_empty() {
            return Err(TypeError::EmptyField("source"));
        }
        if self.good.trim().is_empty() {
            return Err(TypeError::EmptyField("good"));
        }
        if self.bad.trim().is_empty() {
            return Err(TypeError::EmptyField("bad"));
        }
        if self.good == self.bad {
            return Err(TypeError::GoodEqualsBad);
        }
        Ok(())
    }

    /// Evaluation sample with the good translation at T0 (label 0).
    pub fn to_sample(&self) -> Result<EvaluationSample, TypeError> {
        EvaluationSample::new(
            self.source.clone(),
            self.good.clone(),
            self.bad.clone(),
            Label::FirstBetter,
            self.lang.clone(),
            Provenance::Challenge,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn de_en() -> LangPair {
        "de-en".parse().unwrap()
    }

    fn sample(s: &str, t0: &str, t1: &str, label: Label) -> EvaluationSample {
        EvaluationSample::new(s, t0, t1, label, de_en(), Provenance::Darr).unwrap()
    }

    #[test]
    fn serializes_template() {
        let s = sample("Il dort.", "He sleeps.", "He eats.", Label::FirstBetter);
        assert_eq!(
            serialize_sample(&s),
            "Source: Il dort. Translation 0: He sleeps. Translation 1: He eats."
        );
    }

    #[test]
    fn label_not_in_template() {
        let a = sample("S", "A", "B", Label::FirstBetter);
        let b = sample("S", "A", "B", Label::SecondBetter);
        assert_eq!(serialize_sample(&a), serialize_sample(&b));
    }

    #[test]
    fn swap_flips_and_preserves() {
        let s = sample("S", "A", "B", Label::FirstBetter).with_weight(2.5).unwrap();
        let w = swap_sample(&s);
        assert_eq!((w.t0(), w.t1(), w.label()), ("B", "A", Label::SecondBetter));
        assert_eq!(w.weight(), 2.5);
        assert_eq!(w.provenance(), Provenance::Darr);
        assert_eq!(swap_sample(&w), s);
    }

    #[test]
    fn rejects_identical_translations() {
        let err = EvaluationSample::new("S", "A", "A", Label::FirstBetter, de_en(), Provenance::Nli);
        assert_eq!(err.unwrap_err(), TypeError::IdenticalTranslations);
    }

    #[test]
    fn lang_pair_parsing() {
        let lp: LangPair = "cs-en".parse().unwrap();
        assert_eq!((lp.src(), lp.tgt()), ("cs", "en"));
        assert!("csen".parse::<LangPair>().is_err());
        assert!("-en".parse::<LangPair>().is_err());
        assert!("en-en".parse::<LangPair>().is_ok());
    }

    #[test]
    fn category_names_and_codes() {
        assert_eq!("omission".parse::<AcesCategory>(), Ok(AcesCategory::O));
        assert_eq!("DNT".parse::<AcesCategory>(), Ok(AcesCategory::Dnt));
        assert_eq!("Real World Knowledge".parse::<AcesCategory>(), Ok(AcesCategory::Rwk));
        assert!("spelling".parse::<AcesCategory>().is_err());
    }

    #[test]
    fn sample_json_rejects_bad_label() {
        let line = r#"{"source":"S","t0":"A","t1":"B","label":2,"lang":"de-en","provenance":"DARR"}"#;
        assert!(serde_json::from_str::<EvaluationSample>(line).is_err());
        let ok = line.replace("\"label\":2", "\"label\":1");
        let s: EvaluationSample = serde_json::from_str(&ok).unwrap();
        assert_eq!(s.weight(), 1.0);
    }

    fn field() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9.,' ]{0,12}[a-z]".prop_map(|s| s.trim().to_string())
    }

    proptest! {
        #[test]
        fn serialize_round_trips(s in field(), a in field(), b in field()) {
            prop_assume!(a != b && !s.is_empty() && !a.is_empty() && !b.is_empty());
            let x = sample(&s, &a, &b, Label::FirstBetter);
            let text = serialize_sample(&x);
            prop_assert_eq!(split_serialized(&text), Some((s.as_str(), a.as_str(), b.as_str())));
        }

        #[test]
        fn swap_is_involution(s in field(), a in field(), b in field(), y in 0u8..2) {
            prop_assume!(a != b && !s.is_empty() && !a.is_empty() && !b.is_empty());
            let x = sample(&s, &a, &b, Label::try_from(y).unwrap());
            let w = swap_sample(&x);
            prop_assert_eq!(w.label().as_u8(), 1 - y);
            prop_assert_eq!(swap_sample(&w), x);
        }
    }
}
