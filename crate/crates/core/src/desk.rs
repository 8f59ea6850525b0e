//! Small synthetic German-English corpus for exercising the pipeline
//! without external data or models.
//!
//! Good translations map the source word by word. Bad translations carry one
//! of a handful of controlled errors, each of which moves a different group
//! of ranker features. The training stages see disjoint error types while
//! the dev set covers all of them.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::pairgen::{
    build_metric_labeled_pairs, build_nli_pairs, build_ref_discrimination_pairs, PairGenConfig, PairGenError,
};
use crate::perturb::{perturb_corpus, PerturbConfig, PerturbKind, PerturbProviders};
use crate::provider::CharOverlapMetric;
use crate::ranker::train::{Stage, StageData};
use crate::rng::{derive_seed, seeded, Rng};
use crate::types::{
    AcesCategory, ChallengeExample, EvaluationSample, LangPair, NliRecord, Provenance, Relation, ScoreRecord, ScoreScheme, Segment,
};

/// German word and two English renderings.
const LEXICON: [(&str, [&str; 2]); 24] = [
    ("hund", ["dog", "hound"]),
    ("katze", ["cat", "kitty"]),
    ("haus", ["house", "home"]),
    ("baum", ["tree", "oak"]),
    ("wasser", ["water", "liquid"]),
    ("stadt", ["city", "town"]),
    ("kind", ["child", "kid"]),
    ("buch", ["book", "volume"]),
    ("strasse", ["street", "road"]),
    ("schnell", ["quickly", "fast"]),
    ("sieht", ["sees", "watches"]),
    ("trinkt", ["drinks", "sips"]),
    ("liest", ["reads", "studies"]),
    ("findet", ["finds", "discovers"]),
    ("gross", ["big", "large"]),
    ("klein", ["small", "little"]),
    ("alt", ["old", "aged"]),
    ("neu", ["new", "fresh"]),
    ("heute", ["today", "now"]),
    ("morgen", ["tomorrow", "later"]),
    ("fluss", ["river", "stream"]),
    ("vogel", ["bird", "sparrow"]),
    ("brot", ["bread", "loaf"]),
    ("zug", ["train", "railcar"]),
];

pub fn lang() -> LangPair {
    LangPair::new("de", "en").expect("static language pair")
}

/// Controlled translation errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// The number is rendered with a different digit count.
    Number,
    /// Part of the source is left untranslated.
    Copy,
    /// Output written in Cyrillic letters.
    WrongScript,
    /// Content words are missing.
    Omission,
    /// A phrase is repeated.
    Repetition,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 5] = [
        ErrorKind::Number,
        ErrorKind::Copy,
        ErrorKind::WrongScript,
        ErrorKind::Omission,
        ErrorKind::Repetition,
    ];
}

/// Source sentence split into tokens, with the index of its number token.
/// Plain sentences carry no number and no final period.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    words: Vec<usize>,
    number: u32,
    number_at: usize,
    plain: bool,
}

impl Sentence {
    pub fn random(rng: &mut Rng) -> Self {
        let len = rng.gen_range(6..=10);
        let words = (0..len).map(|_| rng.gen_range(0..LEXICON.len())).collect();
        Self {
            words,
            number: rng.gen_range(1..=9),
            number_at: rng.gen_range(1..len),
            plain: false,
        }
    }

    pub fn random_plain(rng: &mut Rng) -> Self {
        Self {
            plain: true,
            ..Self::random(rng)
        }
    }

    fn render(&self, mut word: impl FnMut(usize, usize) -> String, number: &str) -> String {
        let mut toks: Vec<String> = self.words.iter().enumerate().map(|(i, &w)| word(i, w)).collect();
        if self.plain {
            return toks.join(" ");
        }
        toks.insert(self.number_at, number.to_string());
        let mut s = toks.join(" ");
        s.push('.');
        s
    }

    pub fn source(&self) -> String {
        self.render(|_, w| LEXICON[w].0.to_string(), &self.number.to_string())
    }

    /// Correct translation; `variant` picks between the two renderings of
    /// every word.
    pub fn translation(&self, variant: &[bool]) -> String {
        self.target(variant, &self.number.to_string())
    }

    fn target(&self, variant: &[bool], number: &str) -> String {
        self.render(
            |i, w| LEXICON[w].1[usize::from(variant.get(i).copied().unwrap_or(false))].to_string(),
            number,
        )
    }

    pub fn random_translation(&self, rng: &mut Rng) -> String {
        let v: Vec<bool> = (0..self.words.len()).map(|_| rng.gen_bool(0.5)).collect();
        self.translation(&v)
    }

    /// A translation carrying `kind`, built from the same word choices as
    /// `variant`.
    pub fn corrupted(&self, kind: ErrorKind, variant: &[bool], rng: &mut Rng) -> String {
        let good = self.translation(variant);
        match kind {
            ErrorKind::Number => {
                let wrong = self.number * 100 + rng.gen_range(0..100);
                self.target(variant, &wrong.to_string())
            }
            ErrorKind::Copy => self.source(),
            ErrorKind::WrongScript => to_cyrillic(&good),
            ErrorKind::Omission => {
                let toks: Vec<&str> = good.split(' ').collect();
                let keep = toks.len() / 2;
                let mut kept: Vec<&str> = toks[..keep].to_vec();
                if let Some(last) = toks.last() {
                    kept.push(last);
                }
                kept.join(" ")
            }
            ErrorKind::Repetition => {
                let toks: Vec<&str> = good.trim_end_matches('.').split(' ').collect();
                let span = toks.len().min(3);
                let mut out: Vec<&str> = toks.clone();
                for _ in 0..2 {
                    out.extend_from_slice(&toks[toks.len() - span..]);
                }
                let mut s = out.join(" ");
                if !self.plain {
                    s.push('.');
                }
                s
            }
        }
    }
}

fn to_cyrillic(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'a' => 'а',
            'b' => 'б',
            'c' => 'ц',
            'd' => 'д',
            'e' => 'е',
            'f' => 'ф',
            'g' => 'г',
            'h' => 'х',
            'i' => 'и',
            'k' => 'к',
            'l' => 'л',
            'm' => 'м',
            'n' => 'н',
            'o' => 'о',
            'p' => 'п',
            'r' => 'р',
            's' => 'с',
            't' => 'т',
            'u' => 'у',
            'v' => 'в',
            'w' => 'ш',
            'y' => 'ы',
            'z' => 'з',
            other => other,
        })
        .collect()
}

fn variant(s: &Sentence, rng: &mut Rng) -> Vec<bool> {
    (0..s.words.len()).map(|_| rng.gen_bool(0.5)).collect()
}

/// NLI records: the correct rendering is entailed; number errors are
/// contradictions and a second number error is neutral.
pub fn nli_records(n: usize, seed: u64) -> Vec<NliRecord> {
    let mut rng = seeded(derive_seed(seed, "desk:nli"));
    let mut out = Vec::with_capacity(n * 3);
    for _ in 0..n {
        let s = Sentence::random(&mut rng);
        let v = variant(&s, &mut rng);
        let premise = s.source();
        let rec = |hypothesis: String, relation| NliRecord {
            premise: premise.clone(),
            premise_lang: "de".into(),
            hypothesis,
            hypothesis_lang: "en".into(),
            relation,
        };
        out.push(rec(s.translation(&v), Relation::Entailed));
        out.push(rec(s.corrupted(ErrorKind::Number, &v, &mut rng), Relation::Contradiction));
        out.push(rec(s.corrupted(ErrorKind::Number, &v, &mut rng), Relation::Neutral));
    }
    out
}

/// Segments with a reference and two system outputs: an untranslated copy
/// and a wrong-script rendering.
pub fn ref_segments(n: usize, seed: u64) -> Vec<Segment> {
    let mut rng = seeded(derive_seed(seed, "desk:ref"));
    (0..n)
        .map(|i| {
            let s = Sentence::random(&mut rng);
            let v = variant(&s, &mut rng);
            let translations = BTreeMap::from([
                ("copy".to_string(), s.corrupted(ErrorKind::Copy, &v, &mut rng)),
                ("script".to_string(), s.corrupted(ErrorKind::WrongScript, &v, &mut rng)),
            ]);
            Segment::new(format!("ref-{i}"), lang(), s.source(), Some(s.translation(&v)), translations)
                .expect("generated segment is valid")
        })
        .collect()
}

/// Segments for the synthetic stage: references for perturbation and one
/// repetitive plus one alternative correct system output for metric
/// labeling. Sentences are plain so word drop cannot remove numbers or
/// punctuation.
pub fn synthetic_segments(n: usize, seed: u64) -> Vec<Segment> {
    let mut rng = seeded(derive_seed(seed, "desk:synthetic"));
    (0..n)
        .map(|i| {
            let s = Sentence::random_plain(&mut rng);
            let v = variant(&s, &mut rng);
            let translations = BTreeMap::from([
                ("plain".to_string(), s.translation(&v)),
                ("repeat".to_string(), s.corrupted(ErrorKind::Repetition, &v, &mut rng)),
            ]);
            Segment::new(format!("syn-{i}"), lang(), s.source(), Some(s.translation(&v)), translations)
                .expect("generated segment is valid")
        })
        .collect()
}

/// Word-drop perturbation samples plus metric-labeled pairs.
pub fn synthetic_samples(n: usize, seed: u64) -> Result<Vec<EvaluationSample>, PairGenError> {
    let segs = synthetic_segments(n, seed);
    let pcfg = PerturbConfig {
        drop_rate: 0.3,
        rng_seed: seed,
        ..PerturbConfig::default()
    };
    let mut out = perturb_corpus(&segs, PerturbKind::WordDrop, &pcfg, PerturbProviders::default())
        .expect("word drop needs no provider")
        .samples;
    let cfg = PairGenConfig {
        rng_seed: seed,
        ..PairGenConfig::default()
    };
    out.extend(build_metric_labeled_pairs(&segs, &CharOverlapMetric, &cfg)?);
    Ok(out)
}

/// Human-style pairs: a correct translation against one carrying each error
/// kind in turn. Orientation is random.
pub fn human_samples(n: usize, seed: u64, provenance: Provenance) -> Vec<EvaluationSample> {
    let mut rng = seeded(derive_seed(seed, "desk:human"));
    let mut out = Vec::with_capacity(n * ErrorKind::ALL.len());
    for _ in 0..n {
        let s = Sentence::random(&mut rng);
        let v = variant(&s, &mut rng);
        let good = s.translation(&v);
        for kind in ErrorKind::ALL {
            let bad = s.corrupted(kind, &v, &mut rng);
            let first = rng.gen_bool(0.5);
            if let Ok(x) = EvaluationSample::from_preference(s.source(), good.clone(), bad, first, lang(), provenance) {
                out.push(x);
            }
        }
    }
    out
}

/// Training data for the NLI, reference-discrimination and synthetic stages
/// (plus human pairs), each with `n` source sentences.
pub fn stage_data(n: usize, seed: u64) -> Result<StageData, PairGenError> {
    let cfg = PairGenConfig {
        rng_seed: seed,
        ..PairGenConfig::default()
    };
    Ok(StageData::default()
        .with(Stage::Nli, build_nli_pairs(&nli_records(n, seed), &cfg)?)
        .with(Stage::RefDiscrimination, build_ref_discrimination_pairs(&ref_segments(n, seed), &cfg)?)
        .with(Stage::Synthetic, synthetic_samples(n, seed)?)
        .with(Stage::HumanDarr, human_samples(n, derive_seed(seed, "train"), Provenance::Darr)))
}

/// Held-out pairs covering every error kind.
pub fn dev_samples(n: usize, seed: u64) -> Vec<EvaluationSample> {
    human_samples(n, derive_seed(seed, "dev"), Provenance::Darr)
}

/// Pairs whose label is decided by the number alone: both sides are correct
/// word renderings, one of which misstates the number.
pub fn separable_samples(n: usize, seed: u64, provenance: Provenance) -> Vec<EvaluationSample> {
    let mut rng = seeded(derive_seed(seed, "desk:separable"));
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = Sentence::random(&mut rng);
        let good = s.random_translation(&mut rng);
        let v = variant(&s, &mut rng);
        let bad = s.corrupted(ErrorKind::Number, &v, &mut rng);
        let first = rng.gen_bool(0.5);
        if let Ok(x) = EvaluationSample::from_preference(s.source(), good, bad, first, lang(), provenance) {
            out.push(x);
        }
    }
    out
}

/// Challenge examples, one per error kind and sentence, tagged with the
/// closest error category.
pub fn challenge_set(n: usize, seed: u64) -> Vec<ChallengeExample> {
    let mut rng = seeded(derive_seed(seed, "desk:challenge"));
    let mut out = Vec::with_capacity(n * ErrorKind::ALL.len());
    for _ in 0..n {
        let s = Sentence::random(&mut rng);
        let v = variant(&s, &mut rng);
        let good = s.translation(&v);
        for kind in ErrorKind::ALL {
            let (category, phenomenon) = match kind {
                ErrorKind::Number => (AcesCategory::M, "wrong-number"),
                ErrorKind::Copy => (AcesCategory::U, "copy-source"),
                ErrorKind::WrongScript => (AcesCategory::Wl, "wrong-script"),
                ErrorKind::Omission => (AcesCategory::O, "dropped-words"),
                ErrorKind::Repetition => (AcesCategory::A, "repeated-words"),
            };
            let bad = s.corrupted(kind, &v, &mut rng);
            if bad != good {
                out.push(ChallengeExample {
                    source: s.source(),
                    reference: Some(good.clone()),
                    good: good.clone(),
                    bad,
                    phenomenon: phenomenon.to_string(),
                    category,
                    lang: lang(),
                });
            }
        }
    }
    out
}

/// A multi-system corpus with DA scores. Each system makes its own error
/// kind at its own rate; `clean` never errs.
pub fn darr_corpus(n: usize, seed: u64) -> (Vec<Segment>, Vec<ScoreRecord>) {
    let systems: [(&str, Option<ErrorKind>, f64); 6] = [
        ("clean", None, 0.0),
        ("numbers", Some(ErrorKind::Number), 0.5),
        ("copier", Some(ErrorKind::Copy), 0.3),
        ("cyrillic", Some(ErrorKind::WrongScript), 0.2),
        ("dropper", Some(ErrorKind::Omission), 0.6),
        ("looper", Some(ErrorKind::Repetition), 0.4),
    ];
    let mut rng = seeded(derive_seed(seed, "desk:darr"));
    let mut segs = Vec::with_capacity(n);
    let mut scores = Vec::new();
    for i in 0..n {
        let s = Sentence::random(&mut rng);
        let v = variant(&s, &mut rng);
        let id = format!("seg-{i}");
        let mut translations = BTreeMap::new();
        for (sys, kind, rate) in systems {
            let erred = kind.filter(|_| rng.gen_bool(rate));
            let text = match erred {
                Some(k) => s.corrupted(k, &v, &mut rng),
                None => s.random_translation(&mut rng),
            };
            let base: f64 = if erred.is_some() { 40.0 } else { 85.0 };
            let score = (base + rng.gen_range(-12.0..12.0)).clamp(0.0, 100.0);
            scores.push(ScoreRecord {
                segment_id: id.clone(),
                system_id: sys.to_string(),
                score: (score * 10.0).round() / 10.0,
                scheme: ScoreScheme::DaRaw,
            });
            translations.insert(sys.to_string(), text);
        }
        segs.push(Segment::new(id, lang(), s.source(), Some(s.translation(&v)), translations).expect("valid"));
    }
    (segs, scores)
}

/// Mean DA score per system.
pub fn system_gold(scores: &[ScoreRecord]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in scores {
        let e = acc.entry(r.system_id.clone()).or_insert((0.0, 0));
        e.0 += r.score;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}
