//! Readers and writers for the line-delimited `mtrank/1` corpus format.
//!
//! The first line of every file is a JSON header object, each following
//! non-blank line is one JSON record. Record numbers in errors count data
//! lines only, starting at 1 (the header is not counted).

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    AcesCategory, ChallengeExample, EvaluationSample, LangPair, NliRecord, Relation, ScoreRecord,
    ScoreScheme, Segment,
};

pub const FORMAT_VERSION: &str = "mtrank/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(String),
    #[error("missing header line")]
    MissingHeader,
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("unsupported format version {0:?} (expected {FORMAT_VERSION:?})")]
    UnsupportedVersion(String),
    #[error("file kind is {found}, expected {expected}")]
    WrongKind { expected: FileKind, found: FileKind },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("score {value} out of range [0, 100] at line {line}")]
    OutOfRange { line: usize, value: f64 },
    #[error("unknown category {value:?} at line {line}")]
    UnknownCategory { line: usize, value: String },
    #[error("unknown relation {value:?} at line {line}")]
    UnknownRelation { line: usize, value: String },
}

impl IngestError {
    fn malformed(line: usize, reason: impl ToString) -> Self {
        IngestError::MalformedRecord {
            line,
            reason: reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum FileKind {
    Segments,
    Scores,
    Samples,
    Nli,
    Challenge,
    SystemScores,
}

impl std::fmt::Display for FileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FileKind::Segments => "segments",
            FileKind::Scores => "scores",
            FileKind::Samples => "samples",
            FileKind::Nli => "nli",
            FileKind::Challenge => "challenge",
            FileKind::SystemScores => "system-scores",
        };
        f.write_str(s)
    }
}

/// First line of every `mtrank/1` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFileHeader {
    pub format_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FileKind>,
    /// Default language pair for records that omit one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<LangPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<ScoreScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub higher_is_better: Option<bool>,
}

impl CorpusFileHeader {
    pub fn new(kind: FileKind) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            kind: Some(kind),
            lang: None,
            scheme: None,
            higher_is_better: None,
        }
    }

    pub fn with_lang(mut self, lang: LangPair) -> Self {
        self.lang = Some(lang);
        self
    }

    pub fn with_scheme(mut self, scheme: ScoreScheme, higher_is_better: bool) -> Self {
        self.scheme = Some(scheme);
        self.higher_is_better = Some(higher_is_better);
        self
    }

    pub fn parse(line: &str) -> Result<Self, IngestError> {
        let header: CorpusFileHeader =
            serde_json::from_str(line).map_err(|e| IngestError::BadHeader(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(IngestError::UnsupportedVersion(header.format_version));
        }
        Ok(header)
    }

    fn expect_kind(&self, expected: FileKind) -> Result<(), IngestError> {
        match self.kind {
            Some(found) if found != expected => Err(IngestError::WrongKind { expected, found }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Skip bad lines and collect them as warnings instead of aborting.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub header: CorpusFileHeader,
    pub records: Vec<T>,
    pub warnings: Vec<IngestError>,
}

fn parse_lines<R, T, F>(
    reader: R,
    kind: FileKind,
    opts: ParseOptions,
    mut parse_one: F,
) -> Result<Parsed<T>, IngestError>
where
    R: BufRead,
    F: FnMut(&CorpusFileHeader, usize, &str) -> Result<T, IngestError>,
{
    let mut lines = reader.lines();
    let header = loop {
        match lines.next() {
            None => return Err(IngestError::MissingHeader),
            Some(Err(e)) => return Err(IngestError::Io(e.to_string())),
            Some(Ok(l)) if l.trim().is_empty() => continue,
            Some(Ok(l)) => break CorpusFileHeader::parse(&l)?,
        }
    };
    header.expect_kind(kind)?;

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| IngestError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_one(&header, idx + 1, &line) {
            Ok(rec) => records.push(rec),
            Err(e) if opts.lenient => warnings.push(e),
            Err(e) => return Err(e),
        }
    }
    Ok(Parsed {
        header,
        records,
        warnings,
    })
}

fn non_empty(line: usize, name: &str, value: &str) -> Result<(), IngestError> {
    if value.trim().is_empty() {
        Err(IngestError::malformed(line, format!("empty `{name}`")))
    } else {
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    id: String,
    #[serde(default)]
    lang: Option<LangPair>,
    source: String,
    #[serde(default)]
    reference: Option<String>,
    translations: BTreeMap<String, String>,
}

/// Parses a segments file. Ids must be unique within the file.
pub fn parse_segments<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<Parsed<Segment>, IngestError> {
    let mut seen = HashSet::new();
    parse_lines(reader, FileKind::Segments, opts, |header, line, text| {
        let raw: RawSegment =
            serde_json::from_str(text).map_err(|e| IngestError::malformed(line, e))?;
        let lang = raw
            .lang
            .or_else(|| header.lang.clone())
            .ok_or_else(|| IngestError::malformed(line, "missing `lang`"))?;
        let seg = Segment {
            id: raw.id,
            lang,
            source: raw.source,
            reference: raw.reference,
            translations: raw.translations,
        };
        seg.validate().map_err(|e| IngestError::malformed(line, e))?;
        if !seen.insert(seg.id.clone()) {
            return Err(IngestError::DuplicateId(seg.id));
        }
        Ok(seg)
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScore {
    segment_id: String,
    system_id: String,
    score: f64,
}

/// Parses a human score file and normalizes every score to higher-is-better.
///
/// The header must declare `scheme`; MQM files must also declare
/// `higher_is_better`. DA files default to higher-is-better.
pub fn parse_scores<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<Parsed<ScoreRecord>, IngestError> {
    let mut parsed_header = None;
    parse_lines(reader, FileKind::Scores, opts, |header, line, text| {
        let (scheme, higher_is_better) = match parsed_header {
            Some(v) => v,
            None => {
                let v = score_direction(header)?;
                parsed_header = Some(v);
                v
            }
        };
        let raw: RawScore =
            serde_json::from_str(text).map_err(|e| IngestError::malformed(line, e))?;
        non_empty(line, "segment_id", &raw.segment_id)?;
        non_empty(line, "system_id", &raw.system_id)?;
        if !raw.score.is_finite() {
            return Err(IngestError::malformed(line, "non-finite score"));
        }
        if scheme == ScoreScheme::DaRaw && !(0.0..=100.0).contains(&raw.score) {
            return Err(IngestError::OutOfRange {
                line,
                value: raw.score,
            });
        }
        let score = if higher_is_better { raw.score } else { -raw.score };
        Ok(ScoreRecord {
            segment_id: raw.segment_id,
            system_id: raw.system_id,
            score,
            scheme,
        })
    })
}

fn score_direction(header: &CorpusFileHeader) -> Result<(ScoreScheme, bool), IngestError> {
    let scheme = header
        .scheme
        .ok_or_else(|| IngestError::BadHeader("score file header must declare `scheme`".into()))?;
    match (scheme, header.higher_is_better) {
        (ScoreScheme::Mqm, None) => Err(IngestError::BadHeader(
            "MQM header must declare `higher_is_better`".into(),
        )),
        (ScoreScheme::DaRaw, Some(false)) => Err(IngestError::BadHeader(
            "DA_raw scores are higher-is-better".into(),
        )),
        (_, hib) => Ok((scheme, hib.unwrap_or(true))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChallenge {
    source: String,
    #[serde(default)]
    reference: Option<String>,
    good: String,
    bad: String,
    phenomenon: String,
    category: String,
    #[serde(default)]
    lang: Option<LangPair>,
}

pub fn parse_challenge_set<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<Parsed<ChallengeExample>, IngestError> {
    parse_lines(reader, FileKind::Challenge, opts, |header, line, text| {
        let raw: RawChallenge =
            serde_json::from_str(text).map_err(|e| IngestError::malformed(line, e))?;
        let category: AcesCategory = raw
            .category
            .parse()
            .map_err(|value| IngestError::UnknownCategory { line, value })?;
        let lang = raw
            .lang
            .or_else(|| header.lang.clone())
            .ok_or_else(|| IngestError::malformed(line, "missing `lang`"))?;
        non_empty(line, "phenomenon", &raw.phenomenon)?;
        let ex = ChallengeExample {
            source: raw.source,
            reference: raw.reference,
            good: raw.good,
            bad: raw.bad,
            phenomenon: raw.phenomenon,
            category,
            lang,
        };
        ex.validate().map_err(|e| IngestError::malformed(line, e))?;
        Ok(ex)
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNli {
    premise: String,
    premise_lang: String,
    hypothesis: String,
    hypothesis_lang: String,
    relation: String,
}

/// Parses NLI records. Same-language premise/hypothesis pairs are accepted
/// here; pair construction decides what to do with them.
pub fn parse_nli<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<Parsed<NliRecord>, IngestError> {
    parse_lines(reader, FileKind::Nli, opts, |_, line, text| {
        let raw: RawNli =
            serde_json::from_str(text).map_err(|e| IngestError::malformed(line, e))?;
        let relation: Relation = raw
            .relation
            .parse()
            .map_err(|value| IngestError::UnknownRelation { line, value })?;
        non_empty(line, "premise", &raw.premise)?;
        non_empty(line, "premise_lang", &raw.premise_lang)?;
        non_empty(line, "hypothesis", &raw.hypothesis)?;
        non_empty(line, "hypothesis_lang", &raw.hypothesis_lang)?;
        Ok(NliRecord {
            premise: raw.premise,
            premise_lang: raw.premise_lang,
            hypothesis: raw.hypothesis,
            hypothesis_lang: raw.hypothesis_lang,
            relation,
        })
    })
}

pub fn parse_samples<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<Parsed<EvaluationSample>, IngestError> {
    parse_lines(reader, FileKind::Samples, opts, |_, line, text| {
        serde_json::from_str(text).map_err(|e| IngestError::malformed(line, e))
    })
}

/// Gold system-level human score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemGold {
    pub system_id: String,
    pub score: f64,
}

pub fn parse_system_gold<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<Parsed<SystemGold>, IngestError> {
    let mut seen = HashSet::new();
    parse_lines(reader, FileKind::SystemScores, opts, |_, line, text| {
        let g: SystemGold =
            serde_json::from_str(text).map_err(|e| IngestError::malformed(line, e))?;
        non_empty(line, "system_id", &g.system_id)?;
        if !g.score.is_finite() {
            return Err(IngestError::malformed(line, "non-finite score"));
        }
        if !seen.insert(g.system_id.clone()) {
            return Err(IngestError::DuplicateId(g.system_id));
        }
        Ok(g)
    })
}

/// Writes a header line followed by one JSON record per line.
pub fn write_records<W: Write, T: Serialize>(
    mut out: W,
    header: &CorpusFileHeader,
    records: &[T],
) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Serialize)]
struct ScoreOut<'a> {
    segment_id: &'a str,
    system_id: &'a str,
    score: f64,
}

/// Writes normalized score records; the header always says higher-is-better.
pub fn write_scores<W: Write>(
    out: W,
    scheme: ScoreScheme,
    records: &[ScoreRecord],
) -> std::io::Result<()> {
    let header = CorpusFileHeader::new(FileKind::Scores).with_scheme(scheme, true);
    let rows: Vec<ScoreOut<'_>> = records
        .iter()
        .map(|r| ScoreOut {
            segment_id: &r.segment_id,
            system_id: &r.system_id,
            score: r.score,
        })
        .collect();
    write_records(out, &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg_file(lines: &[&str]) -> String {
        let mut s = String::from(r#"{"format_version":"mtrank/1","kind":"segments"}"#);
        for l in lines {
            s.push('\n');
            s.push_str(l);
        }
        s
    }

    #[test]
    fn parses_one_segment() {
        let f = seg_file(&[r#"{"id":"s1","lang":"de-en","source":"Hallo","translations":{"sysA":"Hello"}}"#]);
        let p = parse_segments(f.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.records[0].translations["sysA"], "Hello");
        assert_eq!(p.records[0].lang.to_string(), "de-en");
    }

    #[test]
    fn missing_source_is_malformed_line_1() {
        let f = seg_file(&[r#"{"id":"s1","lang":"de-en","translations":{"sysA":"Hello"}}"#]);
        let err = parse_segments(f.as_bytes(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRecord { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn empty_translation_is_malformed() {
        let f = seg_file(&[r#"{"id":"s1","lang":"de-en","source":"x","translations":{"A":" "}}"#]);
        let err = parse_segments(f.as_bytes(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRecord { line: 1, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let rec = r#"{"id":"s1","lang":"de-en","source":"Hallo","translations":{"sysA":"Hello"}}"#;
        let f = seg_file(&[rec, rec]);
        let err = parse_segments(f.as_bytes(), ParseOptions::default()).unwrap_err();
        assert_eq!(err, IngestError::DuplicateId("s1".into()));
    }

    #[test]
    fn lenient_mode_collects_warnings() {
        let good = r#"{"id":"s1","lang":"de-en","source":"Hallo","translations":{"sysA":"Hello"}}"#;
        let f = seg_file(&[good, "{not json", good]);
        let p = parse_segments(f.as_bytes(), ParseOptions { lenient: true }).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn header_lang_is_default() {
        let f = r#"{"format_version":"mtrank/1","lang":"cs-en"}
{"id":"s1","source":"Ahoj","translations":{"A":"Hi"}}"#;
        let p = parse_segments(f.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(p.records[0].lang.to_string(), "cs-en");
    }

    #[test]
    fn rejects_other_versions_and_kinds() {
        let f = "{\"format_version\":\"mtrank/2\"}\n";
        assert!(matches!(
            parse_segments(f.as_bytes(), ParseOptions::default()),
            Err(IngestError::UnsupportedVersion(_))
        ));
        let f = "{\"format_version\":\"mtrank/1\",\"kind\":\"nli\"}\n";
        assert!(matches!(
            parse_segments(f.as_bytes(), ParseOptions::default()),
            Err(IngestError::WrongKind { .. })
        ));
        assert_eq!(
            parse_segments("".as_bytes(), ParseOptions::default()),
            Err(IngestError::MissingHeader)
        );
    }

    fn scores(header: &str, recs: &[&str]) -> Result<Parsed<ScoreRecord>, IngestError> {
        let mut s = header.to_string();
        for r in recs {
            s.push('\n');
            s.push_str(r);
        }
        parse_scores(s.as_bytes(), ParseOptions::default())
    }

    #[test]
    fn da_raw_scores() {
        let h = r#"{"format_version":"mtrank/1","kind":"scores","scheme":"DA_raw"}"#;
        let p = scores(h, &[r#"{"segment_id":"s1","system_id":"A","score":87.0}"#]).unwrap();
        assert_eq!(p.records[0].score, 87.0);
        let err = scores(h, &[r#"{"segment_id":"s1","system_id":"A","score":101}"#]).unwrap_err();
        assert_eq!(err, IngestError::OutOfRange { line: 1, value: 101.0 });
    }

    #[test]
    fn mqm_lower_is_better_is_negated() {
        let h = r#"{"format_version":"mtrank/1","kind":"scores","scheme":"MQM","higher_is_better":false}"#;
        let p = scores(h, &[r#"{"segment_id":"s1","system_id":"A","score":5.0}"#]).unwrap();
        assert_eq!(p.records[0].score, -5.0);
        assert_eq!(p.records[0].scheme, ScoreScheme::Mqm);
    }

    #[test]
    fn mqm_without_direction_is_bad_header() {
        let h = r#"{"format_version":"mtrank/1","kind":"scores","scheme":"MQM"}"#;
        let err = scores(h, &[r#"{"segment_id":"s1","system_id":"A","score":5.0}"#]).unwrap_err();
        assert!(matches!(err, IngestError::BadHeader(_)));
    }

    fn challenge(rec: &str) -> Result<Parsed<ChallengeExample>, IngestError> {
        let s = format!("{{\"format_version\":\"mtrank/1\",\"kind\":\"challenge\",\"lang\":\"de-en\"}}\n{rec}");
        parse_challenge_set(s.as_bytes(), ParseOptions::default())
    }

    #[test]
    fn challenge_categories() {
        let p = challenge(r#"{"source":"S","good":"g","bad":"b","phenomenon":"x","category":"omission"}"#).unwrap();
        assert_eq!(p.records[0].category, AcesCategory::O);
        let err = challenge(r#"{"source":"S","good":"g","bad":"b","phenomenon":"x","category":"spelling"}"#)
            .unwrap_err();
        assert_eq!(err, IngestError::UnknownCategory { line: 1, value: "spelling".into() });
        let err = challenge(r#"{"source":"S","good":"g","bad":"g","phenomenon":"x","category":"A"}"#)
            .unwrap_err();
        assert!(matches!(err, IngestError::MalformedRecord { line: 1, .. }));
    }

    fn nli(rec: &str) -> Result<Parsed<NliRecord>, IngestError> {
        let s = format!("{{\"format_version\":\"mtrank/1\",\"kind\":\"nli\"}}\n{rec}");
        parse_nli(s.as_bytes(), ParseOptions::default())
    }

    #[test]
    fn nli_relations() {
        let p = nli(r#"{"premise":"Il dort.","premise_lang":"fr","hypothesis":"He sleeps.","hypothesis_lang":"en","relation":"entailment"}"#).unwrap();
        assert_eq!(p.records[0].relation, Relation::Entailed);
        let err = nli(r#"{"premise":"a","premise_lang":"fr","hypothesis":"b","hypothesis_lang":"en","relation":"maybe"}"#).unwrap_err();
        assert_eq!(err, IngestError::UnknownRelation { line: 1, value: "maybe".into() });
        let same = nli(r#"{"premise":"a","premise_lang":"en","hypothesis":"b","hypothesis_lang":"en","relation":"neutral"}"#).unwrap();
        assert_eq!(same.records.len(), 1);
    }

    fn text() -> impl Strategy<Value = String> {
        "[a-zA-Z\u{e4}\u{4e2d}\"\\\\ ]{0,10}[a-z]"
    }

    fn segment_strategy() -> impl Strategy<Value = Segment> {
        (
            text(),
            prop::option::of(text()),
            prop::collection::btree_map("[a-z]{1,4}", text(), 0..4),
        )
            .prop_map(|(source, reference, translations)| Segment {
                id: String::new(),
                lang: "de-en".parse().unwrap(),
                source,
                reference,
                translations,
            })
    }

    proptest! {
        #[test]
        fn segments_round_trip(mut segs in prop::collection::vec(segment_strategy(), 0..6)) {
            for (i, s) in segs.iter_mut().enumerate() {
                s.id = format!("seg{i}");
            }
            let mut buf = Vec::new();
            write_records(&mut buf, &CorpusFileHeader::new(FileKind::Segments), &segs).unwrap();
            let parsed = parse_segments(buf.as_slice(), ParseOptions::default()).unwrap();
            prop_assert_eq!(&parsed.records, &segs);
            let again = parse_segments(buf.as_slice(), ParseOptions::default()).unwrap();
            prop_assert_eq!(parsed, again);
        }

        #[test]
        fn scores_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 0..8), hib in any::<bool>()) {
            let recs: Vec<ScoreRecord> = vals.iter().enumerate().map(|(i, v)| ScoreRecord {
                segment_id: format!("s{i}"),
                system_id: "A".into(),
                score: if hib { *v } else { -*v },
                scheme: ScoreScheme::Mqm,
            }).collect();
            let mut buf = Vec::new();
            write_scores(&mut buf, ScoreScheme::Mqm, &recs).unwrap();
            let parsed = parse_scores(buf.as_slice(), ParseOptions::default()).unwrap();
            prop_assert_eq!(parsed.records, recs);
        }
    }
}
