use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::MetricError;

/// Result of a two-sided paired Student's t-test on `b - a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean_diff: f64,
    /// Infinite when every difference is the same non-zero value.
    #[serde(with = "infinite_as_string")]
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

impl TTest {
    pub fn significant(&self, level: f64) -> bool {
        self.p < level
    }
}

/// Paired t-test with `t = mean(d) / (sd(d) / sqrt(n))`, `d = b - a`,
/// `n - 1` degrees of freedom.
///
/// Zero variance is handled without dividing by zero: identical inputs give
/// `t = 0, p = 1`; a constant non-zero shift gives `t = ±inf, p = 0`.
/// Variance is treated as zero when `sd <= 1e-12 * |mean|`, which absorbs the
/// rounding noise of subtracting scores.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricError::TooFewPairs(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let df = nf - 1.0;
    if mean == 0.0 && sd == 0.0 {
        return Ok(TTest {
            n,
            mean_diff: 0.0,
            t: 0.0,
            df,
            p: 1.0,
        });
    }
    if sd <= 1e-12 * mean.abs() {
        return Ok(TTest {
            n,
            mean_diff: mean,
            t: f64::INFINITY.copysign(mean),
            df,
            p: 0.0,
        });
    }
    let t = mean / (sd / nf.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(TTest {
        n,
        mean_diff: mean,
        t,
        df,
        p,
    })
}

/// JSON has no infinities; write them as "inf"/"-inf".
mod infinite_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("invalid t statistic `{s}`"))),
        }
    }
}
