//! Label-independent problem statistics and their correlation with the label.
//!
//! Counting conventions:
//!
//! * `query_total_occurrences` counts the query predicate in facts, rule
//!   premises and rule conclusions; the query slot itself is not counted.
//! * `num_distinct_predicates_total` covers facts, rules and the query.
//! * `branching_factor` is the mean, over predicates occurring as a premise,
//!   of the number of rules they feed.
//! * `ratio_rules_facts` divides by `max(num_facts, 1)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{PredSet, Problem, VOCAB_SIZE};

/// Feature names in reporting order.
pub const FEATURE_NAMES: [&str; 10] = [
    "num_rules",
    "num_facts",
    "num_distinct_predicates_rules",
    "num_distinct_predicates_total",
    "query_total_occurrences",
    "query_as_rule_conclusion_count",
    "query_in_rule_premises_count",
    "avg_rule_premises",
    "ratio_rules_facts",
    "branching_factor",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub num_rules: u32,
    pub num_facts: u32,
    pub num_distinct_predicates_rules: u32,
    pub num_distinct_predicates_total: u32,
    pub query_total_occurrences: u32,
    pub query_as_rule_conclusion_count: u32,
    pub query_in_rule_premises_count: u32,
    pub avg_rule_premises: f64,
    pub ratio_rules_facts: f64,
    pub branching_factor: f64,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.num_rules as f64,
            self.num_facts as f64,
            self.num_distinct_predicates_rules as f64,
            self.num_distinct_predicates_total as f64,
            self.query_total_occurrences as f64,
            self.query_as_rule_conclusion_count as f64,
            self.query_in_rule_premises_count as f64,
            self.avg_rule_premises,
            self.ratio_rules_facts,
            self.branching_factor,
        ]
    }
}

pub fn compute_features(problem: &Problem) -> FeatureVector {
    let q = problem.query();
    let rules = problem.rules();
    let mut in_rules = PredSet::new();
    let mut feeds = [0u32; VOCAB_SIZE];
    let mut premise_total = 0usize;
    let mut as_conclusion = 0;
    let mut as_premise = 0;
    for r in rules {
        in_rules = in_rules.union(r.premise_set());
        in_rules.insert(r.conclusion());
        premise_total += r.premises().len();
        as_conclusion += u32::from(r.conclusion() == q);
        as_premise += u32::from(r.premise_set().contains(q));
        for p in r.premises() {
            feeds[p.index()] += 1;
        }
    }
    let feeders: Vec<u32> = feeds.iter().copied().filter(|&c| c > 0).collect();
    let num_facts = problem.facts().len() as u32;
    let in_facts = u32::from(problem.facts().contains(&q));

    FeatureVector {
        num_rules: rules.len() as u32,
        num_facts,
        num_distinct_predicates_rules: in_rules.len() as u32,
        num_distinct_predicates_total: problem.mentioned().len() as u32,
        query_total_occurrences: in_facts + as_conclusion + as_premise,
        query_as_rule_conclusion_count: as_conclusion,
        query_in_rule_premises_count: as_premise,
        avg_rule_premises: if rules.is_empty() {
            0.0
        } else {
            premise_total as f64 / rules.len() as f64
        },
        ratio_rules_facts: rules.len() as f64 / num_facts.max(1) as f64,
        branching_factor: if feeders.is_empty() {
            0.0
        } else {
            feeders.iter().sum::<u32>() as f64 / feeders.len() as f64
        },
    }
}

/// Pearson correlation; zero-variance inputs yield 0.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Per-feature Pearson correlation against the 0/1 label.
pub fn pearson_audit<'a>(
    dataset: impl IntoIterator<Item = (&'a Problem, bool)>,
) -> Result<BTreeMap<&'static str, f64>> {
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); FEATURE_NAMES.len()];
    let mut labels = Vec::new();
    for (p, label) in dataset {
        for (col, v) in columns.iter_mut().zip(compute_features(p).values()) {
            col.push(v);
        }
        labels.push(if label { 1.0 } else { 0.0 });
    }
    if labels.len() < 2 {
        return Err(Error::Degenerate(format!("{} samples", labels.len())));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::Degenerate("only one label present".into()));
    }
    Ok(FEATURE_NAMES
        .iter()
        .zip(&columns)
        .map(|(&name, col)| (name, pearson(col, &labels)))
        .collect())
}
