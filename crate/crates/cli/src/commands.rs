use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use mtrank_core::desk;
use mtrank_core::ingest::{self, CorpusFileHeader, FileKind, ParseOptions, Parsed};
use mtrank_core::metaeval::{aces_score, category_taus, grouped_tau, kendall_like_tau, AcesWeights, JudgedPair, TauReport, TieMode};
use mtrank_core::pairgen::{self, NonEntailedPolicy, PairGenConfig};
use mtrank_core::perturb::{perturb_corpus, PerturbConfig, PerturbKind, PerturbProviders};
use mtrank_core::provider::{MaskFiller, Translator};
use mtrank_core::ranker::train::{run_pipeline, Stage, StageData, TrainConfig};
use mtrank_core::ranker::{rank_all, Checkpoint, RankItem, RankerModel};
use mtrank_core::report::{render_aces_table, render_langpair_table, render_tau_report, AcesRow, LangPairRow};
use mtrank_core::rng::{derive_seed, seeded};
use mtrank_core::sysrank::{
    build_win_matrix, inconsistent_triples, render_win_matrix, system_pearson, system_scores, systems_in, Aggregation,
    Inconsistency, SystemScore, WinMatrix,
};
use mtrank_core::types::{swap_sample, AcesCategory, EvaluationSample, ScoreScheme, Segment};
use mtrank_providers::{RemoteMaskFiller, RemoteTranslator};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{in_file, CliError};
use crate::manifest::Run;
use crate::selector::{self, load_checkpoint};
use crate::*;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn read<T>(
    path: &Path,
    parse: impl FnOnce(BufReader<File>, ParseOptions) -> Result<Parsed<T>, ingest::IngestError>,
) -> Result<Vec<T>, CliError> {
    Ok(parse(open(path)?, ParseOptions::default()).map_err(|e| in_file(path, e))?.records)
}

fn records_bytes<T: Serialize>(kind: FileKind, records: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    ingest::write_records(&mut buf, &CorpusFileHeader::new(kind), records).expect("in-memory write");
    buf
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    text.into_bytes()
}

fn ties(t: TieArg) -> TieMode {
    match t {
        TieArg::Discordant => TieMode::Discordant,
        TieArg::Skip => TieMode::Skip,
    }
}

pub fn ingest_check(a: &IngestCheckArgs) -> Result<(), CliError> {
    let opts = ParseOptions { lenient: a.lenient };
    let r = open(&a.input)?;
    let (count, warnings) = match a.kind {
        Kind::Segments => ingest::parse_segments(r, opts).map(|p| (p.records.len(), p.warnings)),
        Kind::Scores => ingest::parse_scores(r, opts).map(|p| (p.records.len(), p.warnings)),
        Kind::Samples => ingest::parse_samples(r, opts).map(|p| (p.records.len(), p.warnings)),
        Kind::Nli => ingest::parse_nli(r, opts).map(|p| (p.records.len(), p.warnings)),
        Kind::Challenge => ingest::parse_challenge_set(r, opts).map(|p| (p.records.len(), p.warnings)),
        Kind::SystemScores => ingest::parse_system_gold(r, opts).map(|p| (p.records.len(), p.warnings)),
    }
    .map_err(|e| in_file(&a.input, e))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("{}: {count} valid records, {} rejected", a.input.display(), warnings.len());
    if warnings.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} invalid records", warnings.len())))
    }
}

pub fn make_pairs(a: &MakePairsArgs, seed: u64) -> Result<(), CliError> {
    let cfg = PairGenConfig {
        darr_threshold: a.threshold,
        max_pairs_per_segment: a.max_pairs_per_segment,
        rng_seed: seed,
        dev_sources_per_langpair: a.dev_size,
        nli_policy: match a.nli_policy {
            NliPolicyArg::Any => NonEntailedPolicy::AnyNonEntailed,
            NliPolicyArg::Contradiction => NonEntailedPolicy::ContradictionOnly,
        },
    };
    cfg.validate()?;
    let mut run = Run::new("make-pairs", a);
    run.seed("seed", seed);
    run.input(&a.input);

    if let PairMode::Nli = a.mode {
        if a.dev_out.is_some() {
            return Err(CliError::Usage("--dev-out needs segment-based modes (darr, ref, metric)".into()));
        }
        let records = read(&a.input, ingest::parse_nli)?;
        let pairs = pairgen::build_nli_pairs(&records, &cfg)?;
        eprintln!("{} NLI pairs", pairs.len());
        return run.emit(&a.output, &records_bytes(FileKind::Samples, &pairs));
    }

    let (segments, scores) = match a.mode {
        PairMode::Darr => {
            let seg_path = a
                .segments
                .as_ref()
                .ok_or_else(|| CliError::Usage("--mode darr needs --segments".into()))?;
            run.input(seg_path);
            (read(seg_path, ingest::parse_segments)?, read(&a.input, ingest::parse_scores)?)
        }
        _ => (read(&a.input, ingest::parse_segments)?, Vec::new()),
    };
    let metric = match a.mode {
        PairMode::Metric => Some(selector::metric(&a.metric, &a.provider)?),
        _ => None,
    };
    let build = |segs: &[Segment]| -> Result<Vec<EvaluationSample>, CliError> {
        Ok(match a.mode {
            PairMode::Darr => {
                let ids: std::collections::HashSet<&str> = segs.iter().map(|s| s.id.as_str()).collect();
                let known: std::collections::HashSet<&str> = segments.iter().map(|s| s.id.as_str()).collect();
                let sc: Vec<_> = scores
                    .iter()
                    .filter(|r| ids.contains(r.segment_id.as_str()) || !known.contains(r.segment_id.as_str()))
                    .cloned()
                    .collect();
                pairgen::build_darr_pairs(segs, &sc, &cfg)?
            }
            PairMode::Ref => pairgen::build_ref_discrimination_pairs(segs, &cfg)?,
            PairMode::Metric => pairgen::build_metric_labeled_pairs(segs, metric.as_deref().expect("metric"), &cfg)?,
            PairMode::Nli => unreachable!(),
        })
    };
    match &a.dev_out {
        Some(dev_path) => {
            let (train, dev) = pairgen::split_dev(&segments, &cfg);
            let (tp, dp) = (build(&train)?, build(&dev)?);
            eprintln!("{} train pairs, {} dev pairs", tp.len(), dp.len());
            run.emit(&a.output, &records_bytes(FileKind::Samples, &tp))?;
            run.emit(dev_path, &records_bytes(FileKind::Samples, &dp))
        }
        None => {
            let pairs = build(&segments)?;
            eprintln!("{} pairs", pairs.len());
            run.emit(&a.output, &records_bytes(FileKind::Samples, &pairs))
        }
    }
}

pub fn perturb(a: &PerturbArgs, seed: u64) -> Result<(), CliError> {
    let kind = match a.kind {
        PerturbKindArg::WordDrop => PerturbKind::WordDrop,
        PerturbKindArg::MlmReplace => PerturbKind::MlmReplace,
        PerturbKindArg::Backtranslate => PerturbKind::Backtranslate,
        PerturbKindArg::BtReplace => PerturbKind::ReplaceAfterBacktranslate,
    };
    let cfg = PerturbConfig {
        drop_rate: a.drop_rate,
        replace_rate: a.replace_rate,
        pivot_lang: a.pivot.clone(),
        rng_seed: seed,
        max_samples_per_langpair: a.max_per_langpair,
        backtranslation_subset: a.backtranslation_subset,
    };
    let filler = match &a.mask_fill {
        Some(url) => Some(RemoteMaskFiller {
            client: a.provider.client(url.trim_end_matches("/mask-fill"))?,
        }),
        None => None,
    };
    let translator = match &a.translate {
        Some(url) => Some(RemoteTranslator {
            client: a.provider.client(url.trim_end_matches("/translate"))?,
        }),
        None => None,
    };
    let providers = PerturbProviders {
        filler: filler.as_ref().map(|f| f as &dyn MaskFiller),
        translator: translator.as_ref().map(|t| t as &dyn Translator),
    };
    let mut run = Run::new("perturb", a);
    run.seed("seed", seed);
    run.input(&a.input);
    let segments = read(&a.input, ingest::parse_segments)?;
    let out = perturb_corpus(&segments, kind, &cfg, providers)?;
    eprintln!(
        "{} samples, {} degenerate perturbations, {} segments without reference",
        out.samples.len(),
        out.degenerate,
        out.missing_reference
    );
    run.emit(&a.output, &records_bytes(FileKind::Samples, &out.samples))
}

pub fn train(a: &TrainArgs, seed: u64) -> Result<(), CliError> {
    let stage_order = a
        .stages
        .split(',')
        .map(|s| s.parse::<Stage>().map_err(CliError::Usage))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        max_steps: a.max_steps,
        eval_every: a.eval_every,
        early_stop_patience: a.patience,
        rng_seed: seed,
        stage_order,
    };
    cfg.validate()?;
    let mut run = Run::new("train", a);
    run.seed("seed", seed);
    let mut samples = Vec::new();
    for p in &a.inputs {
        run.input(p);
        samples.extend(read(p, ingest::parse_samples)?);
    }
    let dev = match &a.dev {
        Some(p) => {
            run.input(p);
            read(p, ingest::parse_samples)?
        }
        None => Vec::new(),
    };
    let init = match &a.init {
        Some(p) => {
            run.input(p);
            load_checkpoint(p)?.model()?
        }
        None => RankerModel::zeros(),
    };
    let data = StageData::from_samples(samples);
    let result = run_pipeline(&init, &data, &dev, &cfg)?;
    for r in &result.provenance.stages {
        eprintln!(
            "stage {}: {} samples, {} steps, best step {}, dev tau {}",
            r.stage,
            data.get(r.stage).len(),
            r.history.steps_run,
            r.history.best_step,
            r.history.best_dev_tau.map_or("n/a".to_string(), |t| format!("{t:.4}"))
        );
    }
    let ck = Checkpoint::new(&result.model, result.provenance);
    run.emit(&a.output, ck.to_json().as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalOutput {
    pub kind: String,
    pub name: String,
    pub ranker: String,
    pub grouping: String,
    pub report: TauReport,
    pub by_langpair: TauReport,
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let mut run = Run::new("eval", a);
    run.input(&a.input);
    let samples = read(&a.input, ingest::parse_samples)?;
    let loaded = selector::load(&a.ranker, &a.provider)?;
    if let Some(p) = &loaded.checkpoint {
        run.input(p);
    }
    let items: Vec<RankItem<'_>> = samples.iter().map(RankItem::from_sample).collect();
    let probs = rank_all(loaded.ranker.as_ref(), &items)?;
    let judged = |key: &dyn Fn(&EvaluationSample) -> Option<String>| -> Result<Vec<JudgedPair>, CliError> {
        samples
            .iter()
            .zip(&probs)
            .map(|(s, p)| JudgedPair::from_sample(s, *p, key(s)).map_err(CliError::from))
            .collect()
    };
    let mode = ties(a.ties);
    let by_lang = grouped_tau(&judged(&|s| Some(s.lang().to_string()))?, mode)?;
    let report = match a.grouping {
        GroupingArg::Global => kendall_like_tau(&judged(&|_| None)?, mode)?,
        GroupingArg::Segment => grouped_tau(&judged(&|s| Some(s.source().to_string()))?, mode)?,
        GroupingArg::Langpair => by_lang.clone(),
    };
    print!("{}", render_tau_report(&report));
    if let Some(out) = &a.output {
        let o = EvalOutput {
            kind: "eval".into(),
            name: a.name.clone().unwrap_or_else(|| a.ranker.to_string()),
            ranker: a.ranker.to_string(),
            grouping: format!("{:?}", a.grouping).to_lowercase(),
            report,
            by_langpair: by_lang,
        };
        run.emit(out, &json_bytes(&o))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AcesOutput {
    pub kind: String,
    pub name: String,
    pub ranker: String,
    pub reports: BTreeMap<AcesCategory, TauReport>,
    pub taus: BTreeMap<AcesCategory, f64>,
    /// Absent when no weight file was given.
    pub score: Option<f64>,
}

pub fn aces_eval(a: &AcesEvalArgs, seed: u64) -> Result<(), CliError> {
    let mut run = Run::new("aces-eval", a);
    run.seed("seed", seed);
    run.input(&a.input);
    let examples = read(&a.input, ingest::parse_challenge_set)?;
    let weights = match &a.weights {
        Some(p) => {
            run.input(p);
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Some(AcesWeights::from_json(&text)?)
        }
        None => None,
    };
    let loaded = selector::load(&a.ranker, &a.provider)?;
    if let Some(p) = &loaded.checkpoint {
        run.input(p);
    }
    let mut rng = seeded(derive_seed(seed, "aces-orientation"));
    let samples = examples
        .iter()
        .map(|ex| {
            let s = ex.to_sample()?;
            Ok(if rng.gen_bool(0.5) { swap_sample(&s) } else { s })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let items: Vec<RankItem<'_>> = samples
        .iter()
        .zip(&examples)
        .map(|(s, ex)| RankItem {
            reference: ex.reference.as_deref(),
            ..RankItem::from_sample(s)
        })
        .collect();
    let probs = rank_all(loaded.ranker.as_ref(), &items)?;
    let judged = examples
        .iter()
        .zip(samples.iter().zip(&probs))
        .map(|(ex, (s, p))| Ok((ex.category, JudgedPair::from_sample(s, *p, None)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let reports = category_taus(&judged, ties(a.ties))?;
    let taus: BTreeMap<AcesCategory, f64> = reports.iter().map(|(c, r)| (*c, r.tau)).collect();
    let score = weights.as_ref().map(|w| aces_score(&taus, w)).transpose()?;
    let name = a.name.clone().unwrap_or_else(|| a.ranker.to_string());
    print!(
        "{}",
        render_aces_table(&[AcesRow {
            name: name.clone(),
            taus: taus.clone(),
            score,
        }])
    );
    if score.is_none() {
        println!("ACES-Score skipped: no --weights given");
    }
    if let Some(out) = &a.output {
        let o = AcesOutput {
            kind: "aces-eval".into(),
            name,
            ranker: a.ranker.to_string(),
            reports,
            taus,
            score,
        };
        run.emit(out, &json_bytes(&o))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SysrankOutput {
    kind: &'static str,
    ranker: String,
    matrix: WinMatrix,
    scores: Vec<SystemScore>,
    inconsistency: Option<Inconsistency>,
    pearson: Option<f64>,
}

pub fn sysrank(a: &SysrankArgs) -> Result<(), CliError> {
    let mut run = Run::new("sysrank", a);
    run.input(&a.input);
    let segments = read(&a.input, ingest::parse_segments)?;
    let systems: Vec<String> = match &a.systems {
        Some(s) => s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
        None => systems_in(&segments),
    };
    let loaded = selector::load(&a.ranker, &a.provider)?;
    if let Some(p) = &loaded.checkpoint {
        run.input(p);
    }
    let agg = match a.aggregate {
        AggregateArg::Probability => Aggregation::Probability,
        AggregateArg::Binarized => Aggregation::Binarized,
    };
    let matrix = build_win_matrix(loaded.ranker.as_ref(), &segments, &systems, agg)?;
    let scores = system_scores(&matrix);
    let inconsistency = (systems.len() >= 3)
        .then(|| inconsistent_triples(&matrix, a.threshold))
        .transpose()?;
    let pearson = match &a.gold {
        Some(p) => {
            run.input(p);
            let gold: BTreeMap<String, f64> = read(p, ingest::parse_system_gold)?
                .into_iter()
                .map(|g| (g.system_id, g.score))
                .collect();
            Some(system_pearson(&scores, &gold)?)
        }
        None => None,
    };

    print!("{}", render_win_matrix(&matrix));
    println!();
    for (i, s) in scores.iter().enumerate() {
        println!("{:>3}. {:<16} {:.4}", i + 1, s.system, s.score);
    }
    if let Some(inc) = &inconsistency {
        println!(
            "inconsistent triples: {}/{} ({:.2}%)",
            inc.inconsistent, inc.total, inc.percentage
        );
    }
    if let Some(r) = pearson {
        println!("system-level pearson: {r:.4}");
    }
    if let Some(out) = &a.output {
        let o = SysrankOutput {
            kind: "sysrank",
            ranker: a.ranker.to_string(),
            matrix,
            scores,
            inconsistency,
            pearson,
        };
        run.emit(out, &json_bytes(&o))?;
    }
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let mut run = Run::new("report", a);
    let mut lang_rows = Vec::new();
    let mut aces_rows = Vec::new();
    for p in &a.inputs {
        run.input(p);
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        let bad = |e: serde_json::Error| CliError::Validation(format!("{}: {e}", p.display()));
        match value.get("kind").and_then(|k| k.as_str()) {
            Some("eval") => {
                let o: EvalOutput = serde_json::from_value(value).map_err(bad)?;
                lang_rows.push(LangPairRow::from_report(o.name, &o.by_langpair));
            }
            Some("aces-eval") => {
                let o: AcesOutput = serde_json::from_value(value).map_err(bad)?;
                aces_rows.push(AcesRow {
                    name: o.name,
                    taus: o.taus,
                    score: o.score,
                });
            }
            _ => {
                return Err(CliError::Validation(format!(
                    "{}: not an eval or aces-eval output",
                    p.display()
                )))
            }
        }
    }
    let mut text = String::new();
    if !lang_rows.is_empty() {
        text.push_str(&render_langpair_table(&lang_rows));
    }
    if !aces_rows.is_empty() {
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&render_aces_table(&aces_rows));
    }
    match &a.output {
        Some(out) => run.emit(out, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn desk(a: &DeskArgs, seed: u64) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.dir).map_err(|e| CliError::io(&a.dir, e))?;
    let mut run = Run::new("desk", a);
    run.seed("seed", seed);
    let path = |name: &str| -> PathBuf { a.dir.join(name) };
    let n = a.size;

    let (segs, scores) = desk::darr_corpus(n, seed);
    run.emit(&path("darr.segments"), &records_bytes(FileKind::Segments, &segs))?;
    let mut buf = Vec::new();
    ingest::write_scores(&mut buf, ScoreScheme::DaRaw, &scores).expect("in-memory write");
    run.emit(&path("darr.scores"), &buf)?;
    let gold: Vec<ingest::SystemGold> = desk::system_gold(&scores)
        .into_iter()
        .map(|(system_id, score)| ingest::SystemGold { system_id, score })
        .collect();
    run.emit(&path("darr.gold"), &records_bytes(FileKind::SystemScores, &gold))?;
    run.emit(&path("nli.records"), &records_bytes(FileKind::Nli, &desk::nli_records(n, seed)))?;
    run.emit(&path("ref.segments"), &records_bytes(FileKind::Segments, &desk::ref_segments(n, seed)))?;
    run.emit(
        &path("synthetic.segments"),
        &records_bytes(FileKind::Segments, &desk::synthetic_segments(n, seed)),
    )?;
    run.emit(&path("dev.samples"), &records_bytes(FileKind::Samples, &desk::dev_samples(n / 4 + 1, seed)))?;
    run.emit(&path("challenge.jsonl"), &records_bytes(FileKind::Challenge, &desk::challenge_set(n, seed)))?;
    eprintln!("wrote desk corpus to {}", a.dir.display());
    Ok(())
}
