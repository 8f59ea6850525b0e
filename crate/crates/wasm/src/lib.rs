//! Browser bindings: system ranking from a hand-edited win matrix, word drop
//! on a sentence, and a side-by-side comparison of two translations under a
//! model trained on the bundled synthetic corpus.
//!
//! Every export takes and returns JSON strings. Errors come back as
//! `{"error": "..."}`.

use std::sync::OnceLock;

use mtrank_core::desk;
use mtrank_core::perturb::word_drop;
use mtrank_core::ranker::features::{featurize_for, FEATURE_NAMES};
use mtrank_core::ranker::train::{run_pipeline, Stage, TrainConfig};
use mtrank_core::ranker::{pair_delta, RankerModel};
use mtrank_core::rng::seeded;
use mtrank_core::sysrank::{inconsistent_triples, system_scores, Inconsistency, SystemScore, WinMatrix};
use mtrank_core::types::LangPair;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Deserialize)]
struct MatrixIn {
    systems: Vec<String>,
    p: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct Ranking {
    pub scores: Vec<SystemScore>,
    pub inconsistency: Option<Inconsistency>,
}

pub fn rank_matrix(json: &str, threshold: f64) -> Result<Ranking, String> {
    let m: MatrixIn = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let matrix = WinMatrix::from_probabilities(m.systems, m.p).map_err(|e| e.to_string())?;
    let inconsistency = if matrix.len() >= 3 {
        Some(inconsistent_triples(&matrix, threshold).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok(Ranking {
        scores: system_scores(&matrix),
        inconsistency,
    })
}

/// `{"systems": [...], "p": [[...]]}` in, scores and inconsistent triples out.
#[wasm_bindgen]
pub fn rank_systems(matrix_json: &str, threshold: f64) -> String {
    respond(rank_matrix(matrix_json, threshold))
}

#[derive(Serialize)]
pub struct Dropped {
    pub perturbed: String,
    pub kept: Vec<bool>,
}

pub fn drop_words(text: &str, rate: f64, seed: u64) -> Result<Dropped, String> {
    let mut rng = seeded(seed);
    let perturbed = word_drop(text, rate, &mut rng).map_err(|e| e.to_string())?;
    let mut rest = perturbed.split_whitespace().peekable();
    let kept = text
        .split_whitespace()
        .map(|t| {
            let hit = rest.peek() == Some(&t);
            if hit {
                rest.next();
            }
            hit
        })
        .collect();
    Ok(Dropped { perturbed, kept })
}

#[wasm_bindgen]
pub fn word_drop_demo(text: &str, rate: f64, seed: u32) -> String {
    respond(drop_words(text, rate, u64::from(seed)))
}

/// Built-in ranker trained once on the synthetic corpus.
pub fn demo_model() -> &'static RankerModel {
    static MODEL: OnceLock<RankerModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let data = desk::stage_data(120, 5).expect("desk corpus");
        let dev = desk::dev_samples(40, 5);
        let cfg = TrainConfig {
            max_steps: 400,
            eval_every: 50,
            rng_seed: 11,
            stage_order: vec![Stage::Nli, Stage::RefDiscrimination, Stage::Synthetic],
            ..TrainConfig::default()
        };
        run_pipeline(&RankerModel::zeros(), &data, &dev, &cfg).expect("training").model
    })
}

#[derive(Serialize)]
pub struct FeatureRow {
    pub name: &'static str,
    pub t0: f64,
    pub t1: f64,
    pub weight: f64,
    /// `weight * (t1 - t0)`; positive favors T1.
    pub contribution: f64,
}

#[derive(Serialize)]
pub struct Comparison {
    /// P(T1 better).
    pub p: f64,
    pub features: Vec<FeatureRow>,
}

pub fn compare_pair(lang: &str, source: &str, t0: &str, t1: &str) -> Result<Comparison, String> {
    let lang: LangPair = lang.parse().map_err(|e: mtrank_core::types::TypeError| e.to_string())?;
    if source.trim().is_empty() || t0.trim().is_empty() || t1.trim().is_empty() {
        return Err("source and both translations are required".into());
    }
    let model = demo_model();
    let f0 = featurize_for(source, t0, Some(lang.tgt()));
    let f1 = featurize_for(source, t1, Some(lang.tgt()));
    let features = FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| FeatureRow {
            name,
            t0: f0.0[i],
            t1: f1.0[i],
            weight: model.weights[i],
            contribution: model.weights[i] * (f1.0[i] - f0.0[i]),
        })
        .collect();
    Ok(Comparison {
        p: model.predict_delta(&pair_delta(source, t0, t1, Some(&lang))),
        features,
    })
}

#[wasm_bindgen]
pub fn compare(lang: &str, source: &str, t0: &str, t1: &str) -> String {
    respond(compare_pair(lang, source, t0, t1))
}
