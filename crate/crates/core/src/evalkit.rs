//! Retrieval metrics and paired significance statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

pub const DEFAULT_BETA: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("differences have zero variance")]
    ZeroVariance,
    #[error("method {method:?} scored a different query set than {baseline:?}")]
    QuerySetMismatch { method: String, baseline: String },
    #[error("method {0:?} has no judgments")]
    UnknownMethod(String),
    #[error("duplicate judgment for method {method:?}, query {query_id:?}")]
    DuplicateJudgment { method: String, query_id: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Precision and recall of `retrieved` against `gold`. Empty retrieval scores
/// precision 0.
pub fn precision_recall(
    retrieved: &BTreeSet<u32>,
    gold: &BTreeSet<u32>,
) -> Result<(f64, f64), EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let hit = retrieved.intersection(gold).count() as f64;
    let precision = if retrieved.is_empty() {
        0.0
    } else {
        hit / retrieved.len() as f64
    };
    Ok((precision, hit / gold.len() as f64))
}

fn check_unit(what: &'static str, value: f64) -> Result<(), EvalError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EvalError::OutOfRange {
            what,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// `(1 + b^2) p r / (b^2 p + r)`; `b > 1` favours recall. Zero when `p = r = 0`.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> Result<f64, EvalError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(EvalError::BadBeta(beta));
    }
    check_unit("precision", precision)?;
    check_unit("recall", recall)?;
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + b2) * precision * recall / denom)
}

/// `0.5 * expert + 0.5 * 5 * f`, in `[0.5, 5]`.
pub fn total_score(expert: f64, f_adjusted: f64) -> Result<f64, EvalError> {
    if !(1.0..=5.0).contains(&expert) {
        return Err(EvalError::OutOfRange {
            what: "expert",
            value: expert,
            lo: 1.0,
            hi: 5.0,
        });
    }
    check_unit("f_adjusted", f_adjusted)?;
    Ok(0.5 * expert + 2.5 * f_adjusted)
}

fn mean_sd(diffs: &[f64]) -> Result<(f64, f64), EvalError> {
    let n = diffs.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples(n));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Err(EvalError::ZeroVariance);
    }
    Ok((mean, sd))
}

/// `P(T > t)` for Student's t with `df` degrees of freedom.
pub fn student_t_upper_tail(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let half_tail = 0.5 * beta_reg(df / 2.0, 0.5, x);
    if t >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub mean_diff: f64,
    pub t: f64,
    pub p_one_tailed: f64,
}

/// One-sample t-test on paired differences, `H1: mean > 0`.
pub fn paired_t(diffs: &[f64]) -> Result<PairedT, EvalError> {
    let (mean, sd) = mean_sd(diffs)?;
    let n = diffs.len() as f64;
    let t = mean / (sd / n.sqrt());
    Ok(PairedT {
        mean_diff: mean,
        t,
        p_one_tailed: student_t_upper_tail(t, n - 1.0),
    })
}

/// Mean difference over the sample standard deviation of the differences.
pub fn cohens_d(diffs: &[f64]) -> Result<f64, EvalError> {
    let (mean, sd) = mean_sd(diffs)?;
    Ok(mean / sd)
}

/// One line of the judgments file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub method: String,
    pub query_id: String,
    pub gold: Vec<u32>,
    pub retrieved: Vec<u32>,
    pub expert: Option<f64>,
}

pub fn parse_judgments(text: &str) -> Result<Vec<JudgmentRecord>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f_adjusted: f64,
    pub expert: Option<f64>,
    pub total: Option<f64>,
}

pub fn score_query(rec: &JudgmentRecord, beta: f64) -> Result<QueryScore, EvalError> {
    let gold: BTreeSet<u32> = rec.gold.iter().copied().collect();
    let retrieved: BTreeSet<u32> = rec.retrieved.iter().copied().collect();
    let (precision, recall) = precision_recall(&retrieved, &gold)?;
    let f = f_beta(precision, recall, beta)?;
    let total = rec.expert.map(|e| total_score(e, f)).transpose()?;
    Ok(QueryScore {
        query_id: rec.query_id.clone(),
        precision,
        recall,
        f_adjusted: f,
        expert: rec.expert,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub n_queries: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f_adjusted: f64,
    /// Over queries that carry an expert score.
    pub mean_expert: Option<f64>,
    pub mean_total: Option<f64>,
    pub queries: Vec<QueryScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Total,
    Expert,
}

impl Metric {
    fn label(self) -> &'static str {
        match self {
            Metric::Total => "Total Score",
            Metric::Expert => "Expert Score",
        }
    }

    fn of(self, q: &QueryScore) -> Option<f64> {
        match self {
            Metric::Total => q.total,
            Metric::Expert => q.expert,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub method: String,
    pub baseline: String,
    pub metric: Metric,
    pub n: usize,
    pub mean_diff: Option<f64>,
    pub t: Option<f64>,
    pub p_one_tailed: Option<f64>,
    pub cohens_d: Option<f64>,
    /// Why the statistics are missing, if they are.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub query_id: String,
    pub method: String,
    pub total_diff: Option<f64>,
    pub expert_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub beta: f64,
    pub baseline: String,
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
    pub diffs: Vec<DiffRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores every method and compares each non-baseline method against the
/// baseline on per-query Total and Expert differences. Comparison rows list
/// all Total rows first, then all Expert rows.
///
/// `methods` fixes the report order; when empty, methods appear in the order
/// first seen in `records`.
pub fn compare_methods(
    records: &[JudgmentRecord],
    methods: &[String],
    baseline: &str,
    beta: f64,
) -> Result<EvalReport, EvalError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(EvalError::BadBeta(beta));
    }
    let mut order: Vec<String> = methods.to_vec();
    if order.is_empty() {
        for r in records {
            if !order.contains(&r.method) {
                order.push(r.method.clone());
            }
        }
    }
    if !order.iter().any(|m| m == baseline) {
        order.insert(0, baseline.to_owned());
    }

    let mut by_method: BTreeMap<&str, BTreeMap<&str, &JudgmentRecord>> = BTreeMap::new();
    for r in records {
        let slot = by_method.entry(&r.method).or_default();
        if slot.insert(&r.query_id, r).is_some() {
            return Err(EvalError::DuplicateJudgment {
                method: r.method.clone(),
                query_id: r.query_id.clone(),
            });
        }
    }

    let base_queries: BTreeSet<&str> = by_method
        .get(baseline)
        .ok_or_else(|| EvalError::UnknownMethod(baseline.to_owned()))?
        .keys()
        .copied()
        .collect();

    let mut summaries = Vec::new();
    for m in &order {
        let recs = by_method
            .get(m.as_str())
            .ok_or_else(|| EvalError::UnknownMethod(m.clone()))?;
        if recs.keys().copied().collect::<BTreeSet<_>>() != base_queries {
            return Err(EvalError::QuerySetMismatch {
                method: m.clone(),
                baseline: baseline.to_owned(),
            });
        }
        let queries: Vec<QueryScore> = recs
            .values()
            .map(|r| score_query(r, beta))
            .collect::<Result<_, _>>()?;
        summaries.push(MethodSummary {
            method: m.clone(),
            n_queries: queries.len(),
            mean_precision: mean(queries.iter().map(|q| q.precision)).unwrap_or(0.0),
            mean_recall: mean(queries.iter().map(|q| q.recall)).unwrap_or(0.0),
            mean_f_adjusted: mean(queries.iter().map(|q| q.f_adjusted)).unwrap_or(0.0),
            mean_expert: mean(queries.iter().filter_map(|q| q.expert)),
            mean_total: mean(queries.iter().filter_map(|q| q.total)),
            queries,
        });
    }

    let base = summaries
        .iter()
        .find(|s| s.method == baseline)
        .expect("baseline summarized")
        .clone();
    let others: Vec<&MethodSummary> = summaries.iter().filter(|s| s.method != baseline).collect();

    let mut comparisons = Vec::new();
    for metric in [Metric::Total, Metric::Expert] {
        for s in &others {
            comparisons.push(compare_one(s, &base, metric));
        }
    }

    let mut diffs = Vec::new();
    for s in &others {
        for (q, b) in s.queries.iter().zip(&base.queries) {
            diffs.push(DiffRow {
                query_id: q.query_id.clone(),
                method: s.method.clone(),
                total_diff: q.total.zip(b.total).map(|(x, y)| x - y),
                expert_diff: q.expert.zip(b.expert).map(|(x, y)| x - y),
            });
        }
    }

    Ok(EvalReport {
        beta,
        baseline: baseline.to_owned(),
        methods: summaries,
        comparisons,
        diffs,
    })
}

fn compare_one(s: &MethodSummary, base: &MethodSummary, metric: Metric) -> Comparison {
    let mut c = Comparison {
        label: format!("{} vs {} ({})", s.method, base.method, metric.label()),
        method: s.method.clone(),
        baseline: base.method.clone(),
        metric,
        n: s.queries.len(),
        mean_diff: None,
        t: None,
        p_one_tailed: None,
        cohens_d: None,
        note: None,
    };
    // Queries are aligned: both come from maps keyed by the same query ids.
    let diffs: Option<Vec<f64>> = s
        .queries
        .iter()
        .zip(&base.queries)
        .map(|(q, b)| Some(metric.of(q)? - metric.of(b)?))
        .collect();
    let Some(diffs) = diffs else {
        c.note = Some("missing expert scores".into());
        return c;
    };
    c.mean_diff = mean(diffs.iter().copied());
    match paired_t(&diffs) {
        Ok(r) => {
            c.t = Some(r.t);
            c.p_one_tailed = Some(r.p_one_tailed);
            c.cohens_d = cohens_d(&diffs).ok();
        }
        Err(e) => c.note = Some(e.to_string()),
    }
    c
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

impl EvalReport {
    /// Plain-text report: per-method means, then the comparison table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "beta = {}  baseline = {}", self.beta, self.baseline);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "Method", "n", "Precision", "Recall", "F_adj", "Expert", "Total"
        );
        for m in &self.methods {
            let _ = writeln!(
                out,
                "{:<16} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9} {:>9}",
                m.method,
                m.n_queries,
                m.mean_precision,
                m.mean_recall,
                m.mean_f_adjusted,
                fmt_opt(m.mean_expert, 4),
                fmt_opt(m.mean_total, 4)
            );
        }
        let _ = writeln!(out);
        let width = self
            .comparisons
            .iter()
            .map(|c| c.label.chars().count())
            .max()
            .unwrap_or(10)
            .max(10);
        let _ = writeln!(
            out,
            "{:<width$} | {:>15} | {:>11} | {:>20} | {:>9}",
            "Comparison", "Mean Difference", "t-statistic", "p-value (one-tailed)", "Cohen's d"
        );
        for c in &self.comparisons {
            let _ = write!(
                out,
                "{:<width$} | {:>15} | {:>11} | {:>20} | {:>9}",
                c.label,
                fmt_opt(c.mean_diff, 3),
                fmt_opt(c.t, 2),
                fmt_opt(c.p_one_tailed, 3),
                fmt_opt(c.cohens_d, 3)
            );
            if let Some(note) = &c.note {
                let _ = write!(out, "  ({note})");
            }
            let _ = writeln!(out);
        }
        out
    }

    /// Per-query differences against the baseline.
    pub fn diffs_csv(&self) -> String {
        let mut out = String::from("query_id,method,total_diff,expert_diff\n");
        for d in &self.diffs {
            let cell = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v}"));
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(&d.query_id),
                csv_field(&d.method),
                cell(d.total_diff),
                cell(d.expert_diff)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
