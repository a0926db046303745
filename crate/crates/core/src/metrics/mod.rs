//! BLEU, ROUGE-L and METEOR over plain word tokens.
//!
//! Variants:
//!
//! * BLEU: sentence level, n-grams up to `min(4, |c|)` with equal weights,
//!   unigram precision unsmoothed, add-one smoothing of numerator and
//!   denominator for n >= 2, brevity penalty `exp(1 - r/c)` when `c < r`.
//!   Zero when the candidate is empty or shares no unigram with the reference.
//! * ROUGE-L: LCS-based F-measure with beta = 1.
//! * METEOR: exact unigram matches only, alignment with the most matches and
//!   then the fewest chunks, alpha = 0.9, beta = 3, gamma = 0.5.

mod meteor;
mod report;
mod stats;

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use meteor::{meteor, meteor_alignment, Alignment, METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA};
pub use report::{EvalReport, ReportHeader, ReportRow, METRIC_VARIANTS};
pub use stats::{paired_t_test, TTest};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<MetricError>,
    },
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("a paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
}

impl MetricScore {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Bleu => self.bleu,
            Metric::RougeL => self.rouge_l,
            Metric::Meteor => self.meteor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Bleu,
    RougeL,
    Meteor,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Bleu, Metric::RougeL, Metric::Meteor];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Bleu => "BLEU",
            Metric::RougeL => "ROUGE-L",
            Metric::Meteor => "METEOR",
        }
    }
}

/// Lowercased alphanumeric runs; whitespace and punctuation separate tokens.
pub fn plain_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

pub fn bleu<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let c = candidate.len();
    if c == 0 {
        return Ok(0.0);
    }
    let max_n = c.min(4);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let matched: usize = cand
            .iter()
            .map(|(g, &k)| k.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        let total = c + 1 - n;
        let p = if n == 1 {
            if matched == 0 {
                return Ok(0.0);
            }
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        log_sum += p.ln() / max_n as f64;
    }
    let r = reference.len();
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok((bp * log_sum.exp()).clamp(0.0, 1.0))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let l = lcs_len(candidate, reference);
    if l == 0 {
        return Ok(0.0);
    }
    let p = l as f64 / candidate.len() as f64;
    let r = l as f64 / reference.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

/// All three metrics on plain tokens of `generated` and `reference`.
pub fn score_pair(generated: &str, reference: &str) -> Result<MetricScore, MetricError> {
    let g = plain_tokens(generated);
    let r = plain_tokens(reference);
    Ok(MetricScore {
        bleu: bleu(&g, &r)?,
        rouge_l: rouge_l(&g, &r)?,
        meteor: meteor(&g, &r)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub generated: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id: String,
    pub scores: MetricScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<ScoredPair>,
    /// Arithmetic means over rows.
    pub aggregate: MetricScore,
}

pub fn evaluate(pairs: &[EvalPair]) -> Result<Evaluation, MetricError> {
    use rayon::prelude::*;
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let rows = pairs
        .par_iter()
        .map(|p| {
            score_pair(&p.generated, &p.reference)
                .map(|scores| ScoredPair {
                    id: p.id.clone(),
                    scores,
                })
                .map_err(|e| MetricError::Sample {
                    id: p.id.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = macro_mean(rows.iter().map(|r| r.scores));
    Ok(Evaluation { rows, aggregate })
}

pub fn macro_mean(scores: impl IntoIterator<Item = MetricScore>) -> MetricScore {
    let mut sum = MetricScore::default();
    let mut n = 0usize;
    for s in scores {
        sum.bleu += s.bleu;
        sum.rouge_l += s.rouge_l;
        sum.meteor += s.meteor;
        n += 1;
    }
    if n == 0 {
        return sum;
    }
    let n = n as f64;
    MetricScore {
        bleu: sum.bleu / n,
        rouge_l: sum.rouge_l / n,
        meteor: sum.meteor / n,
    }
}
