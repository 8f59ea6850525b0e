use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use mtrank_core::provider::{char_ngram_f1, MaskFiller, MetricScorer, ProviderError, Translator};
use mtrank_core::ranker::{antisymmetry_gap, rank_all, RankItem, Ranker};
use mtrank_providers::stub::StubServer;
use mtrank_providers::wire::*;
use mtrank_providers::*;
use serde_json::json;

fn client(url: &str) -> HttpClient {
    HttpClient::new(ProviderEndpoint::new(url), RetryPolicy::none()).unwrap()
}

fn fast_retry(n: u32) -> RetryPolicy {
    RetryPolicy {
        max_retries: n,
        initial_backoff_ms: 1,
        max_backoff_ms: 4,
    }
}

/// `/rank` stub: p = len(t1) / (len(t0) + len(t1)), which is antisymmetric.
fn length_ranker() -> StubServer {
    StubServer::start(|path, body| {
        assert_eq!(path, "/rank");
        let req: RankRequest = serde_json::from_str(body).unwrap();
        let p: Vec<f64> = req
            .items
            .iter()
            .map(|it| {
                let (a, b) = (it.t0.chars().count() as f64, it.t1.chars().count() as f64);
                if a + b == 0.0 { 0.5 } else { b / (a + b) }
            })
            .collect();
        (200, json!({"v": 1, "p": p}).to_string())
    })
    .unwrap()
}

#[test]
fn mask_fill_round_trip_and_validation() {
    let srv = StubServer::start(|_, body| {
        let req: MaskFillRequest = serde_json::from_str(body).unwrap();
        assert_eq!(req.v, 1);
        (200, json!({"v": 1, "fill": format!("fill-{}", req.lang)}).to_string())
    })
    .unwrap();
    let f = RemoteMaskFiller { client: client(&srv.url()) };
    assert_eq!(f.fill("a [MASK] b", "de").unwrap(), "fill-de");
    assert_eq!(f.fill("no mask", "de"), Err(ProviderError::NoMaskToken));
    assert_eq!(f.fill("[MASK] [MASK]", "de"), Err(ProviderError::MultipleMaskTokens));
    assert_eq!(f.client.audit_log().len(), 1);
    assert_eq!(f.client.audit_log()[0].sha256.len(), 64);
}

#[test]
fn translation_contracts() {
    let srv = StubServer::start(|_, body| {
        let req: TranslateRequest = serde_json::from_str(body).unwrap();
        match (req.src.as_str(), req.tgt.as_str()) {
            ("en", "fr") => (200, json!({"v": 1, "text": req.text.to_uppercase(), "deterministic": true}).to_string()),
            ("fr", "en") => (200, json!({"v": 1, "text": req.text.to_lowercase(), "deterministic": true}).to_string()),
            ("en", "xx") => (200, json!({"v": 1, "text": req.text, "deterministic": false}).to_string()),
            _ => (422, json!({"v": 1, "error": "unsupported"}).to_string()),
        }
    })
    .unwrap();
    let t = RemoteTranslator { client: client(&srv.url()) };
    let there = t.translate("hello world", "en", "fr").unwrap();
    assert_eq!(there, "HELLO WORLD");
    assert_eq!(t.translate(&there, "fr", "en").unwrap(), "hello world");
    assert!(matches!(t.translate("x", "en", "ja"), Err(ProviderError::UnsupportedLanguagePair { .. })));
    assert!(matches!(t.translate("x", "en", "en"), Err(ProviderError::UnsupportedLanguagePair { .. })));
    assert!(matches!(t.translate("x", "en", "xx"), Err(ProviderError::Unsupported(_))));
}

#[test]
fn metric_scores_are_deterministic() {
    let srv = StubServer::start(|_, body| {
        let req: ScoreRequest = serde_json::from_str(body).unwrap();
        let score = char_ngram_f1(req.reference.as_deref().unwrap_or(&req.src), &req.mt, 3);
        (200, json!({"v": 1, "score": score}).to_string())
    })
    .unwrap();
    let m = RemoteMetric { client: client(&srv.url()) };
    assert_eq!(m.score("s", Some("the cat sat"), "the cat sat").unwrap(), 1.0);
    assert_eq!(m.score("s", Some("the cat sat"), "ЖЖЖЖ").unwrap(), 0.0);
    let a = m.score("s", Some("the cat"), "a cat").unwrap();
    assert_eq!(a, m.score("s", Some("the cat"), "a cat").unwrap());
    let log = m.client.audit_log();
    assert_eq!(log[2].sha256, log[3].sha256);
}

#[test]
fn rank_constant_and_order() {
    let half = StubServer::start(|_, body| {
        let req: RankRequest = serde_json::from_str(body).unwrap();
        (200, json!({"v": 1, "p": vec![0.5; req.items.len()]}).to_string())
    })
    .unwrap();
    let r = RemoteRanker { client: client(&half.url()) };
    let items = [RankItem::new("s", "a", "bb"), RankItem::new("s", "ccc", "d")];
    assert_eq!(r.rank_batch(&items).unwrap(), vec![0.5, 0.5]);

    let srv = length_ranker();
    let r = RemoteRanker { client: client(&srv.url()) };
    let p = r.rank_batch(&items).unwrap();
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((p[1] - 0.25).abs() < 1e-12);
    assert!(antisymmetry_gap(&r, &items).unwrap() < 1e-12);
}

#[test]
fn oversize_batch_is_rejected_client_side() {
    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    let srv = StubServer::start(move |_, _| {
        h.fetch_add(1, Ordering::SeqCst);
        (200, json!({"v": 1, "p": []}).to_string())
    })
    .unwrap();
    let mut ep = ProviderEndpoint::new(srv.url());
    ep.max_batch = 2;
    let r = RemoteRanker {
        client: HttpClient::new(ep, RetryPolicy::none()).unwrap(),
    };
    let items = vec![RankItem::new("s", "a", "b"); 3];
    assert_eq!(r.rank_batch(&items), Err(ProviderError::BatchTooLarge { len: 3, max: 2 }));
    assert_eq!(hits.load(Ordering::SeqCst), 0);
}

#[test]
fn malformed_responses() {
    for body in [
        json!({"v": 1, "p": [1.5]}).to_string(),
        json!({"v": 1, "p": [0.5, 0.5]}).to_string(),
        json!({"v": 2, "p": [0.5]}).to_string(),
        "not json".to_string(),
    ] {
        let srv = StubServer::start(move |_, _| (200, body.clone())).unwrap();
        let r = RemoteRanker { client: client(&srv.url()) };
        let e = r.rank_batch(&[RankItem::new("s", "a", "b")]).unwrap_err();
        assert!(matches!(e, ProviderError::MalformedResponse(_)), "{e:?}");
    }
}

#[test]
fn transient_errors_are_retried() {
    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    let srv = StubServer::start(move |_, _| {
        if h.fetch_add(1, Ordering::SeqCst) < 2 {
            (503, "{}".into())
        } else {
            (200, json!({"v": 1, "p": [0.9]}).to_string())
        }
    })
    .unwrap();
    let r = RemoteRanker {
        client: HttpClient::new(ProviderEndpoint::new(srv.url()), fast_retry(3)).unwrap(),
    };
    assert_eq!(r.rank_batch(&[RankItem::new("s", "a", "b")]).unwrap(), vec![0.9]);
    assert_eq!(hits.load(Ordering::SeqCst), 3);

    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    let bad = StubServer::start(move |_, _| {
        h.fetch_add(1, Ordering::SeqCst);
        (400, "{}".into())
    })
    .unwrap();
    let r = RemoteRanker {
        client: HttpClient::new(ProviderEndpoint::new(bad.url()), fast_retry(3)).unwrap(),
    };
    assert_eq!(r.rank_batch(&[RankItem::new("s", "a", "b")]), Err(ProviderError::BadStatus(400)));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn timeouts_map_to_timeout() {
    let srv = StubServer::start(|_, _| {
        std::thread::sleep(Duration::from_millis(400));
        (200, json!({"v": 1, "p": [0.5]}).to_string())
    })
    .unwrap();
    let mut ep = ProviderEndpoint::new(srv.url());
    ep.timeout_ms = 50;
    let r = RemoteRanker {
        client: HttpClient::new(ep, RetryPolicy::none()).unwrap(),
    };
    assert_eq!(r.rank_batch(&[RankItem::new("s", "a", "b")]), Err(ProviderError::Timeout));
}

#[test]
fn fuzz_round_trip_preserves_order() {
    let srv = length_ranker();
    let mut ep = ProviderEndpoint::new(srv.url());
    ep.max_batch = 256;
    ep.supports_concurrency = false;
    let r = RemoteRanker {
        client: HttpClient::new(ep, RetryPolicy::none()).unwrap(),
    };
    let texts: Vec<(String, String, String)> = (0..10_000)
        .map(|i| (format!("src {i} \"q\" ü"), "x".repeat(i % 17 + 1), "y".repeat(i % 5 + 1)))
        .collect();
    let items: Vec<RankItem> = texts.iter().map(|(s, a, b)| RankItem::new(s, a, b)).collect();
    let p = rank_all(&r, &items).unwrap();
    assert_eq!(p.len(), items.len());
    for (i, pi) in p.iter().enumerate() {
        let (a, b) = ((i % 17 + 1) as f64, (i % 5 + 1) as f64);
        assert!((pi - b / (a + b)).abs() < 1e-12);
    }
}
