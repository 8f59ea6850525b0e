//! Plain-text result tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metaeval::{mean, TauReport};
use crate::types::AcesCategory;

/// One ranker's tau per language pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangPairRow {
    pub name: String,
    pub taus: BTreeMap<String, f64>,
}

impl LangPairRow {
    /// Takes the per-group taus of a report grouped by language pair.
    pub fn from_report(name: impl Into<String>, report: &TauReport) -> Self {
        Self {
            name: name.into(),
            taus: report.groups.iter().map(|g| (g.key.clone(), g.tau)).collect(),
        }
    }

    /// Unweighted mean over language pairs.
    pub fn avg(&self) -> Option<f64> {
        mean(&self.taus.values().copied().collect::<Vec<_>>())
    }
}

/// Rows are rankers, columns are language pairs followed by `Avg`.
/// Missing cells print as `-`.
pub fn render_langpair_table(rows: &[LangPairRow]) -> String {
    let cols: Vec<String> = rows
        .iter()
        .flat_map(|r| r.taus.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let name_w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
    let w = cols.iter().map(String::len).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Ranker");
    for c in &cols {
        let _ = write!(out, " {c:>w$}");
    }
    let _ = writeln!(out, " {:>w$}", "Avg");
    for r in rows {
        let _ = write!(out, "{:<name_w$}", r.name);
        for c in &cols {
            match r.taus.get(c) {
                Some(t) => {
                    let _ = write!(out, " {t:>w$.4}");
                }
                None => {
                    let _ = write!(out, " {:>w$}", "-");
                }
            }
        }
        match r.avg() {
            Some(a) => {
                let _ = writeln!(out, " {a:>w$.4}");
            }
            None => {
                let _ = writeln!(out, " {:>w$}", "-");
            }
        }
    }
    out
}

/// One ranker's tau per ACES category plus its weighted score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcesRow {
    pub name: String,
    pub taus: BTreeMap<AcesCategory, f64>,
    pub score: Option<f64>,
}

/// Columns follow the fixed category order, then `ACES-Score`.
pub fn render_aces_table(rows: &[AcesRow]) -> String {
    let name_w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
    let w = 7;
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Ranker");
    for c in AcesCategory::ALL {
        let _ = write!(out, " {:>w$}", c.code());
    }
    let _ = writeln!(out, " {:>10}", "ACES-Score");
    for r in rows {
        let _ = write!(out, "{:<name_w$}", r.name);
        for c in AcesCategory::ALL {
            match r.taus.get(&c) {
                Some(t) => {
                    let _ = write!(out, " {t:>w$.3}");
                }
                None => {
                    let _ = write!(out, " {:>w$}", "-");
                }
            }
        }
        match r.score {
            Some(s) => {
                let _ = writeln!(out, " {s:>10.2}");
            }
            None => {
                let _ = writeln!(out, " {:>10}", "-");
            }
        }
    }
    out
}

/// One-line summary of a tau report.
pub fn render_tau_report(r: &TauReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "tau={:.4} concordant={} discordant={} skipped={} grouping={:?}",
        r.tau, r.concordant, r.discordant, r.skipped, r.grouping
    );
    if !r.groups.is_empty() {
        let w = r.groups.iter().map(|g| g.key.len()).max().unwrap_or(0).max(5);
        let _ = writeln!(out, "{:<w$} {:>8} {:>6} {:>6}", "group", "tau", "conc", "disc");
        for g in &r.groups {
            let _ = writeln!(out, "{:<w$} {:>8.4} {:>6} {:>6}", g.key, g.tau, g.concordant, g.discordant);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langpair_table_has_avg() {
        let rows = vec![
            LangPairRow {
                name: "builtin".into(),
                taus: BTreeMap::from([("de-en".into(), 0.4), ("zh-en".into(), 0.2)]),
            },
            LangPairRow {
                name: "chrF".into(),
                taus: BTreeMap::from([("de-en".into(), 0.1)]),
            },
        ];
        let t = render_langpair_table(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].contains("de-en") && lines[0].contains("zh-en") && lines[0].ends_with("Avg"));
        assert!(lines[1].ends_with("0.3000"));
        assert!(lines[2].contains('-'));
        assert!(lines[2].ends_with("0.1000"));
    }

    #[test]
    fn aces_table_layout() {
        let row = AcesRow {
            name: "m".into(),
            taus: AcesCategory::ALL.iter().map(|c| (*c, 0.5)).collect(),
            score: Some(18.46),
        };
        let t = render_aces_table(&[row]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].contains("DNT") && lines[0].ends_with("ACES-Score"));
        assert!(lines[1].ends_with("18.46"));
        assert_eq!(lines[1].matches("0.500").count(), 10);
    }
}
