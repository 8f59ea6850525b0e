use mtrank_wasm::*;

#[test]
fn worked_matrix_ranks_c_a_b() {
    let out = rank_systems(
        r#"{"systems":["A","B","C"],"p":[[0.5,0.7,0.3],[0.3,0.5,0.4],[0.7,0.6,0.5]]}"#,
        0.5,
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let order: Vec<&str> = v["scores"].as_array().unwrap().iter().map(|s| s["system"].as_str().unwrap()).collect();
    assert_eq!(order, ["C", "A", "B"]);
    assert_eq!(v["inconsistency"]["percentage"], 0.0);
}

#[test]
fn bad_matrix_reports_error() {
    let v: serde_json::Value = serde_json::from_str(&rank_systems(r#"{"systems":["A"],"p":[]}"#, 0.5)).unwrap();
    assert!(v["error"].is_string());
    let v: serde_json::Value = serde_json::from_str(&rank_systems("nope", 0.5)).unwrap();
    assert!(v["error"].is_string());
}

#[test]
fn word_drop_marks_kept_tokens() {
    let d = drop_words("a b c d e f g h i j", 0.5, 3).unwrap();
    assert_eq!(d.kept.len(), 10);
    let kept: Vec<&str> = "a b c d e f g h i j"
        .split_whitespace()
        .zip(&d.kept)
        .filter(|(_, k)| **k)
        .map(|(t, _)| t)
        .collect();
    assert_eq!(kept.join(" "), d.perturbed);
    assert_eq!(drop_words("a b c", 0.5, 3).unwrap().perturbed, drop_words("a b c", 0.5, 3).unwrap().perturbed);
}

#[test]
fn compare_prefers_correct_number() {
    let c = compare_pair("de-en", "der hund sieht 3 katzen.", "the dog sees 3 cats.", "the dog sees 300 cats.").unwrap();
    assert!(c.p < 0.5, "p = {}", c.p);
    assert_eq!(c.features.len(), 7);
    let swapped = compare_pair("de-en", "der hund sieht 3 katzen.", "the dog sees 300 cats.", "the dog sees 3 cats.").unwrap();
    assert!((c.p + swapped.p - 1.0).abs() < 1e-12);
    assert!(compare_pair("xx", "a", "b", "c").is_err());
}
