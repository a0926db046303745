use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{macro_mean, Metric, MetricScore};
use crate::cache::write_atomic;

/// Description of each metric variant, copied into every report header.
pub const METRIC_VARIANTS: [(&str, &str); 4] = [
    (
        "bleu",
        "sentence BLEU, n-grams up to min(4, candidate length), equal weights, add-one smoothing for n >= 2, brevity penalty; macro-averaged",
    ),
    ("rouge_l", "ROUGE-L F-measure (LCS), beta = 1"),
    (
        "meteor",
        "exact-match METEOR, most matches then fewest chunks, alpha = 0.9, beta = 3, gamma = 0.5; no stemming or synonyms",
    ),
    ("tokens", "lowercased alphanumeric runs; whitespace and punctuation separate"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub metrics: BTreeMap<String, String>,
    pub strategy: String,
    pub model: String,
    pub corpus: String,
    pub k: usize,
    pub template_family: String,
    pub prompt_layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    pub samples: usize,
}

impl ReportHeader {
    pub fn new(
        strategy: impl Into<String>,
        model: impl Into<String>,
        corpus: impl Into<String>,
        k: usize,
        template_family: impl Into<String>,
    ) -> Self {
        ReportHeader {
            metrics: METRIC_VARIANTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            strategy: strategy.into(),
            model: model.into(),
            corpus: corpus.into(),
            k,
            template_family: template_family.into(),
            prompt_layout: "demonstrations as 'Code: ...\\nSummary: ...' blocks in ascending similarity before the query"
                .into(),
            intent: None,
            samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub prediction: String,
    pub reference: String,
    #[serde(flatten)]
    pub scores: MetricScore,
}

/// Per-sample and aggregate scores of one run, with the settings that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub header: ReportHeader,
    pub rows: Vec<ReportRow>,
    pub aggregate: MetricScore,
}

impl EvalReport {
    pub fn new(mut header: ReportHeader, rows: Vec<ReportRow>) -> Self {
        header.samples = rows.len();
        let aggregate = macro_mean(rows.iter().map(|r| r.scores));
        EvalReport {
            header,
            rows,
            aggregate,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
    }

    pub fn scores(&self, metric: Metric) -> Vec<f64> {
        self.rows.iter().map(|r| r.scores.get(metric)).collect()
    }

    /// Aggregate row as a fixed-width table, three decimals.
    pub fn table(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "corpus {}  model {}  strategy {}  k {}  samples {}{}",
            h.corpus,
            h.model,
            h.strategy,
            h.k,
            h.samples,
            h.intent.as_ref().map(|i| format!("  intent {i}")).unwrap_or_default()
        );
        let _ = writeln!(out, "{:>8} {:>8} {:>8}", "BLEU", "ROUGE-L", "METEOR");
        let a = &self.aggregate;
        let _ = writeln!(out, "{:>8.3} {:>8.3} {:>8.3}", a.bleu, a.rouge_l, a.meteor);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, v: f64) -> ReportRow {
        ReportRow {
            id: id.into(),
            prediction: "p".into(),
            reference: "r".into(),
            scores: MetricScore {
                bleu: v,
                rouge_l: v,
                meteor: v,
            },
        }
    }

    #[test]
    fn json_roundtrip_and_table() {
        let r = EvalReport::new(
            ReportHeader::new("ner", "stub", "conala", 10, "inst-wrapped"),
            vec![row("a", 0.25), row("b", 0.5)],
        );
        assert_eq!(r.aggregate.bleu, 0.375);
        assert_eq!(r.header.samples, 2);
        let json = r.to_json();
        assert!(json.contains("\"rouge_l\": 0.25"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(r.table().contains("   0.375    0.375    0.375"));
    }
}
