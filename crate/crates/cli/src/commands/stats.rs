use std::collections::BTreeMap;

use hornforge::features::{pearson_audit, FEATURE_NAMES};
use hornforge::generators::LabeledProblem;
use hornforge::Problem;
use serde::Serialize;

use super::augment::AugmentedRecord;
use super::emit;
use crate::error::Result;
use crate::files::{read_jsonl, Run};
use crate::StatsArgs;

#[derive(Serialize)]
struct Row {
    feature: &'static str,
    original: Option<f64>,
    augmented: Option<f64>,
    combined: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    n_original: usize,
    n_augmented: usize,
    features: Vec<Row>,
}

/// `None` when the split has a single label.
fn audit<'a>(rows: impl IntoIterator<Item = (&'a Problem, bool)>) -> Option<BTreeMap<&'static str, f64>> {
    pearson_audit(rows).ok()
}

pub fn run(a: StatsArgs) -> Result<()> {
    let mut run = Run::start();
    run.input(&a.input)?;
    let original: Vec<LabeledProblem> = read_jsonl(&a.input)?;
    let augmented: Vec<AugmentedRecord> = match &a.augmented {
        Some(p) => {
            run.input(p)?;
            read_jsonl(p)?
        }
        None => Vec::new(),
    };
    let orig = audit(original.iter().map(|l| (&l.problem, l.label)));
    let aug = audit(augmented.iter().map(|r| (&r.example.problem, r.example.label)));
    let comb = (!augmented.is_empty()).then(|| {
        audit(
            original
                .iter()
                .map(|l| (&l.problem, l.label))
                .chain(augmented.iter().map(|r| (&r.example.problem, r.example.label))),
        )
    });
    let pick = |m: &Option<BTreeMap<&'static str, f64>>, name: &str| m.as_ref().map(|m| m[name]);
    let report = Report {
        n_original: original.len(),
        n_augmented: augmented.len(),
        features: FEATURE_NAMES
            .iter()
            .map(|&feature| Row {
                feature,
                original: pick(&orig, feature),
                augmented: pick(&aug, feature),
                combined: comb.as_ref().and_then(|c| pick(c, feature)),
            })
            .collect(),
    };

    let cell = |v: Option<f64>| v.map_or_else(|| "      -".to_string(), |x| format!("{x:+7.3}"));
    eprintln!("{:<32} {:>8} {:>9} {:>8}", "feature", "original", "augmented", "combined");
    for r in &report.features {
        eprintln!("{:<32} {:>8} {:>9} {:>8}", r.feature, cell(r.original), cell(r.augmented), cell(r.combined));
    }
    emit(&run, &report, a.out.as_deref())
}
