//! `builtin:<ckpt>`, `remote:<url>` and `metric:<url>` ranker selectors.

use std::path::{Path, PathBuf};

use clap::Args;
use mtrank_core::provider::{CharOverlapMetric, MetricScorer, ProviderError};
use mtrank_core::ranker::{Checkpoint, MetricRanker, Ranker};
use mtrank_providers::{HttpClient, ProviderEndpoint, RemoteMetric, RemoteRanker, RetryPolicy};
use serde::Serialize;

use crate::error::CliError;

/// Connection settings shared by every remote provider of a command.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ProviderOpts {
    /// Per-request timeout in milliseconds.
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    /// Largest batch sent to /rank.
    #[arg(long, default_value_t = 64)]
    pub max_batch: usize,
    /// Retries for timeouts, transport errors, 429 and 5xx.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Send one request at a time.
    #[arg(long)]
    pub serial: bool,
    /// Bearer token, read from the environment.
    #[arg(long, env = "MTRANK_PROVIDER_TOKEN", hide_env_values = true)]
    #[serde(skip)]
    pub token: Option<String>,
}

impl ProviderOpts {
    pub fn client(&self, url: &str) -> Result<HttpClient, CliError> {
        let ep = ProviderEndpoint {
            base_url: url.trim_end_matches('/').to_string(),
            timeout_ms: self.timeout_ms,
            max_batch: self.max_batch,
            supports_concurrency: !self.serial,
            auth_token: self.token.clone(),
        };
        let retry = RetryPolicy {
            max_retries: self.retries,
            ..RetryPolicy::default()
        };
        HttpClient::new(ep, retry).map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// Base URL for a provider: a trailing endpoint path such as `/rank` is
/// accepted and stripped.
fn base_url(url: &str, endpoint: &str) -> String {
    url.trim_end_matches('/').trim_end_matches(endpoint).to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankerSelector {
    Builtin(PathBuf),
    Remote(String),
    Metric(String),
}

impl std::str::FromStr for RankerSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected builtin:<ckpt>, remote:<url> or metric:<url>, got {s:?}"))?;
        if rest.is_empty() {
            return Err(format!("empty target in {s:?}"));
        }
        match kind {
            "builtin" => Ok(RankerSelector::Builtin(PathBuf::from(rest))),
            "remote" => Ok(RankerSelector::Remote(rest.to_string())),
            "metric" => Ok(RankerSelector::Metric(rest.to_string())),
            other => Err(format!("unknown ranker kind {other:?}")),
        }
    }
}

impl std::fmt::Display for RankerSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RankerSelector::Builtin(p) => write!(f, "builtin:{}", p.display()),
            RankerSelector::Remote(u) => write!(f, "remote:{u}"),
            RankerSelector::Metric(u) => write!(f, "metric:{u}"),
        }
    }
}

impl Serialize for RankerSelector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Metric named `char-overlap` (built in) or served at an http(s) URL.
pub fn metric(spec: &str, opts: &ProviderOpts) -> Result<Box<dyn MetricScorer>, CliError> {
    if spec == "char-overlap" {
        return Ok(Box::new(CharOverlapMetric));
    }
    Ok(Box::new(RemoteMetric {
        client: opts.client(&base_url(spec, "/score"))?,
    }))
}

struct BoxedMetric(Box<dyn MetricScorer>);

impl MetricScorer for BoxedMetric {
    fn score(&self, source: &str, reference: Option<&str>, translation: &str) -> Result<f64, ProviderError> {
        self.0.score(source, reference, translation)
    }
}

pub struct LoadedRanker {
    pub ranker: Box<dyn Ranker>,
    /// Checkpoint file, when the ranker came from one.
    pub checkpoint: Option<PathBuf>,
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(Checkpoint::from_json(&text)?)
}

pub fn load(sel: &RankerSelector, opts: &ProviderOpts) -> Result<LoadedRanker, CliError> {
    Ok(match sel {
        RankerSelector::Builtin(p) => LoadedRanker {
            ranker: Box::new(load_checkpoint(p)?.model()?),
            checkpoint: Some(p.clone()),
        },
        RankerSelector::Remote(url) => LoadedRanker {
            ranker: Box::new(RemoteRanker {
                client: opts.client(&base_url(url, "/rank"))?,
            }),
            checkpoint: None,
        },
        RankerSelector::Metric(spec) => LoadedRanker {
            ranker: Box::new(MetricRanker {
                metric: BoxedMetric(metric(spec, opts)?),
            }),
            checkpoint: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors_parse() {
        assert_eq!("builtin:m.ckpt".parse(), Ok(RankerSelector::Builtin("m.ckpt".into())));
        assert_eq!(
            "remote:http://h:1/rank".parse(),
            Ok(RankerSelector::Remote("http://h:1/rank".into()))
        );
        assert_eq!("metric:char-overlap".parse(), Ok(RankerSelector::Metric("char-overlap".into())));
        assert!("model.ckpt".parse::<RankerSelector>().is_err());
        assert!("magic:x".parse::<RankerSelector>().is_err());
        assert!("builtin:".parse::<RankerSelector>().is_err());
        assert_eq!(base_url("http://h:1/rank", "/rank"), "http://h:1");
        assert_eq!(base_url("http://h:1/", "/rank"), "http://h:1");
    }
}
