use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use super::HarnessError;
use crate::metrics::{paired_t_test, EvalReport, Metric, MetricScore, TTest};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub baseline: f64,
    pub value: f64,
    /// `(value - baseline) / baseline * 100`; absent when the baseline is 0
    /// and the value is not.
    pub gain_percent: Option<f64>,
    /// Paired on sample id; absent with fewer than two samples.
    pub t_test: Option<TTest>,
}

/// Every report against the first one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub names: Vec<String>,
    pub aggregates: Vec<MetricScore>,
    pub samples: usize,
    /// One entry per report after the first, each with one row per metric.
    pub versus_baseline: Vec<Vec<MetricComparison>>,
}

pub fn cmd_compare(paths: &[PathBuf]) -> Result<Comparison, Error> {
    let named = paths
        .iter()
        .map(|p| {
            EvalReport::load(p)
                .map(|r| (p.display().to_string(), r))
                .map_err(|e| HarnessError::io(p, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(compare_reports(&named)?)
}

pub fn compare_reports(named: &[(String, EvalReport)]) -> Result<Comparison, HarnessError> {
    if named.len() < 2 {
        return Err(HarnessError::InvalidSpec("compare needs at least two reports".into()));
    }
    let (base_name, base) = &named[0];
    let base_ids: Vec<&str> = base.rows.iter().map(|r| r.id.as_str()).collect();
    let base_set: BTreeSet<&str> = base_ids.iter().copied().collect();
    let mut versus = Vec::new();
    for (name, report) in &named[1..] {
        let by_id: HashMap<&str, &MetricScore> = report.rows.iter().map(|r| (r.id.as_str(), &r.scores)).collect();
        let other_set: BTreeSet<&str> = by_id.keys().copied().collect();
        if other_set != base_set || by_id.len() != report.rows.len() || base_set.len() != base_ids.len() {
            return Err(mismatch(base_name, &base_set, name, &other_set));
        }
        let rows = Metric::ALL
            .iter()
            .map(|&metric| {
                let a: Vec<f64> = base.rows.iter().map(|r| r.scores.get(metric)).collect();
                let b: Vec<f64> = base_ids.iter().map(|id| by_id[id].get(metric)).collect();
                let (baseline, value) = (base.aggregate.get(metric), report.aggregate.get(metric));
                MetricComparison {
                    metric,
                    baseline,
                    value,
                    gain_percent: gain_percent(baseline, value),
                    t_test: paired_t_test(&a, &b).ok(),
                }
            })
            .collect();
        versus.push(rows);
    }
    Ok(Comparison {
        names: named.iter().map(|(n, _)| n.clone()).collect(),
        aggregates: named.iter().map(|(_, r)| r.aggregate).collect(),
        samples: base_ids.len(),
        versus_baseline: versus,
    })
}

fn mismatch(a_name: &str, a: &BTreeSet<&str>, b_name: &str, b: &BTreeSet<&str>) -> HarnessError {
    let show = |s: Vec<&&str>| {
        let mut out: Vec<String> = s.iter().take(5).map(|x| x.to_string()).collect();
        if s.len() > 5 {
            out.push(format!("... ({} total)", s.len()));
        }
        out.join(", ")
    };
    let only_a: Vec<_> = a.difference(b).collect();
    let only_b: Vec<_> = b.difference(a).collect();
    let detail = if only_a.is_empty() && only_b.is_empty() {
        "duplicate sample ids".to_string()
    } else {
        format!(
            "only in {a_name}: [{}]; only in {b_name}: [{}]",
            show(only_a),
            show(only_b)
        )
    };
    HarnessError::SampleSetMismatch { detail }
}

pub fn gain_percent(baseline: f64, value: f64) -> Option<f64> {
    if baseline == 0.0 {
        (value == 0.0).then_some(0.0)
    } else {
        Some((value - baseline) / baseline * 100.0)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} samples", self.samples)?;
        for (i, name) in self.names.iter().enumerate() {
            writeln!(f, "[{i}] {name}")?;
        }
        write!(f, "{:<10}", "metric")?;
        for i in 0..self.names.len() {
            write!(f, " {:>8}", format!("[{i}]"))?;
        }
        writeln!(f)?;
        for metric in Metric::ALL {
            write!(f, "{:<10}", metric.label())?;
            for a in &self.aggregates {
                write!(f, " {:>8.3}", a.get(metric))?;
            }
            writeln!(f)?;
        }
        for (i, rows) in self.versus_baseline.iter().enumerate() {
            writeln!(f, "[{}] vs [0]:", i + 1)?;
            for row in rows {
                let gain = row.gain_percent.map_or("n/a".to_string(), |g| format!("{g:+.2}%"));
                let test = row.t_test.map_or("t-test n/a".to_string(), |t| {
                    format!(
                        "t = {:.3}, p = {:.4}{}",
                        t.t,
                        t.p,
                        if t.significant(0.05) { " (significant at 95%)" } else { "" }
                    )
                });
                writeln!(f, "  {:<10} gain {:>9}  {test}", row.metric.label(), gain)?;
            }
        }
        Ok(())
    }
}
