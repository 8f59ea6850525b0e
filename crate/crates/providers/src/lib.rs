//! HTTP providers for the `/mask-fill`, `/translate`, `/score` and `/rank`
//! endpoints.

pub mod client;
pub mod stub;
pub mod wire;

use mtrank_core::provider::{check_single_mask, MaskFiller, MetricScorer, ProviderError, Translator};
use mtrank_core::ranker::{RankItem, Ranker};

pub use client::{AuditEntry, HttpClient, ProviderEndpoint, RetryPolicy};
use wire::*;

fn check_version(v: u32) -> Result<(), ProviderError> {
    if v == PROTOCOL_VERSION {
        Ok(())
    } else {
        Err(ProviderError::MalformedResponse(format!("protocol version {v}, expected {PROTOCOL_VERSION}")))
    }
}

pub struct RemoteMaskFiller {
    pub client: HttpClient,
}

impl MaskFiller for RemoteMaskFiller {
    fn fill(&self, text_with_mask: &str, lang: &str) -> Result<String, ProviderError> {
        check_single_mask(text_with_mask)?;
        let resp: MaskFillResponse = self.client.post(
            "/mask-fill",
            &MaskFillRequest {
                v: PROTOCOL_VERSION,
                text: text_with_mask.to_string(),
                lang: lang.to_string(),
            },
        )?;
        check_version(resp.v)?;
        Ok(resp.fill)
    }
}

pub struct RemoteTranslator {
    pub client: HttpClient,
}

impl Translator for RemoteTranslator {
    /// HTTP 422 means the provider does not serve the pair.
    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, ProviderError> {
        let unsupported = || ProviderError::UnsupportedLanguagePair {
            src: src.into(),
            tgt: tgt.into(),
        };
        if src == tgt {
            return Err(unsupported());
        }
        let resp: TranslateResponse = self
            .client
            .post(
                "/translate",
                &TranslateRequest {
                    v: PROTOCOL_VERSION,
                    text: text.to_string(),
                    src: src.to_string(),
                    tgt: tgt.to_string(),
                },
            )
            .map_err(|e| match e {
                ProviderError::BadStatus(422) => unsupported(),
                other => other,
            })?;
        check_version(resp.v)?;
        if !resp.deterministic {
            return Err(ProviderError::Unsupported("translation provider is not deterministic".into()));
        }
        Ok(resp.text)
    }
}

pub struct RemoteMetric {
    pub client: HttpClient,
}

impl MetricScorer for RemoteMetric {
    fn score(&self, source: &str, reference: Option<&str>, translation: &str) -> Result<f64, ProviderError> {
        let resp: ScoreResponse = self.client.post(
            "/score",
            &ScoreRequest {
                v: PROTOCOL_VERSION,
                src: source.to_string(),
                reference: reference.map(str::to_string),
                mt: translation.to_string(),
            },
        )?;
        check_version(resp.v)?;
        if !resp.score.is_finite() {
            return Err(ProviderError::MalformedResponse(format!("non-finite score {}", resp.score)));
        }
        Ok(resp.score)
    }
}

/// A pairwise ranker served over `/rank`.
pub struct RemoteRanker {
    pub client: HttpClient,
}

impl Ranker for RemoteRanker {
    fn rank_batch(&self, items: &[RankItem<'_>]) -> Result<Vec<f64>, ProviderError> {
        let max = self.client.endpoint().max_batch;
        if items.len() > max {
            return Err(ProviderError::BatchTooLarge { len: items.len(), max });
        }
        let req = RankRequest {
            v: PROTOCOL_VERSION,
            items: items
                .iter()
                .map(|it| RankWireItem {
                    src: it.source.to_string(),
                    t0: it.t0.to_string(),
                    t1: it.t1.to_string(),
                })
                .collect(),
        };
        let resp: RankResponse = self.client.post("/rank", &req)?;
        check_version(resp.v)?;
        if resp.p.len() != items.len() {
            return Err(ProviderError::MalformedResponse(format!(
                "sent {} items, got {} probabilities",
                items.len(),
                resp.p.len()
            )));
        }
        if let Some(bad) = resp.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ProviderError::MalformedResponse(format!("probability {bad} outside [0, 1]")));
        }
        Ok(resp.p)
    }

    fn max_batch(&self) -> usize {
        self.client.endpoint().max_batch
    }
}
