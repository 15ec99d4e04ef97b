use std::path::{Path, PathBuf};

use hornforge::eval::{
    grade_cot, grade_direct, marginal_contribution, non_inferiority, AblationTable, Component, DepthAccumulator,
    DepthBucket, Marginal, NonInferiority,
};
use hornforge::generators::LabeledProblem;
use hornforge::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::emit;
use crate::error::{CliError, Result};
use crate::files::{read_json, read_jsonl, Run};
use crate::{EvalArgs, EvalMode, EvalReport};

/// One model output; `id` is the dataset line, defaulting to the record's own position.
#[derive(Debug, Deserialize)]
struct Prediction {
    id: Option<usize>,
    tokens: Vec<u16>,
}

#[derive(Debug, Deserialize)]
struct PairedSeries {
    direct: Vec<f64>,
    cot: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Graded {
    correct: bool,
    malformed: bool,
    hallucinated: u32,
    missed: bool,
    delta: u32,
    label: bool,
}

#[derive(Serialize)]
struct ErrorCounts {
    n: usize,
    correct: usize,
    malformed: usize,
    traces_with_hallucination: usize,
    hallucinated_steps: u64,
    missed_deductions: usize,
    wrong_on_provable: usize,
    wrong_on_unprovable: usize,
}

#[derive(Serialize)]
struct ComponentMarginals {
    component: Component,
    cells: Vec<Marginal>,
}

#[derive(Serialize)]
#[serde(tag = "report", rename_all = "lowercase")]
enum Report {
    Accuracy {
        mode: &'static str,
        n: usize,
        accuracy: f64,
        buckets: Vec<DepthBucket>,
        overflow: u64,
    },
    Errors {
        mode: &'static str,
        #[serde(flatten)]
        counts: ErrorCounts,
    },
    Marginal {
        components: Vec<ComponentMarginals>,
    },
    Noninferiority {
        margin: f64,
        #[serde(flatten)]
        result: NonInferiority,
    },
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str, report: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::Usage(format!("--report {report} needs {flag}")))
}

fn grade_all(run: &mut Run, a: &EvalArgs) -> Result<Vec<Graded>> {
    let pred_path = required(&a.pred, "--pred", "accuracy/errors")?;
    let data_path = required(&a.dataset, "--dataset", "accuracy/errors")?;
    run.input(pred_path)?;
    run.input(data_path)?;
    let preds: Vec<Prediction> = read_jsonl(pred_path)?;
    let data: Vec<LabeledProblem> = read_jsonl(data_path)?;
    preds
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let id = p.id.unwrap_or(i);
            let ex = data
                .get(id)
                .ok_or_else(|| Error::InvalidParams(format!("prediction {i} refers to example {id} of {}", data.len())))?;
            let mut g = Graded {
                delta: ex.delta,
                label: ex.label,
                ..Graded::default()
            };
            match a.mode {
                EvalMode::Direct => {
                    let d = p.tokens.first().map(|&t| grade_direct(t, ex.label));
                    g.correct = d.is_some_and(|d| d.correct);
                    g.malformed = d.is_none_or(|d| d.malformed);
                }
                EvalMode::Cot => {
                    let t = grade_cot(&p.tokens, &ex.problem);
                    g.correct = t.final_correct;
                    g.malformed = t.malformed;
                    g.hallucinated = t.hallucinated_steps;
                    g.missed = t.missed_deduction;
                }
            }
            Ok(g)
        })
        .collect()
}

fn mode_name(m: EvalMode) -> &'static str {
    match m {
        EvalMode::Direct => "direct",
        EvalMode::Cot => "cot",
    }
}

pub fn run(a: EvalArgs) -> Result<()> {
    let mut run = Run::start();
    let report = match a.report {
        EvalReport::Accuracy => {
            let graded = grade_all(&mut run, &a)?;
            let max = graded.iter().map(|g| g.delta).max().unwrap_or(0);
            let edges = a.edges.clone().unwrap_or_else(|| (0..=max).collect());
            let mut acc = DepthAccumulator::new(&edges)?;
            for g in &graded {
                acc.push(g.correct, g.delta);
            }
            let correct = graded.iter().filter(|g| g.correct).count();
            Report::Accuracy {
                mode: mode_name(a.mode),
                n: graded.len(),
                accuracy: if graded.is_empty() { 0.0 } else { correct as f64 / graded.len() as f64 },
                buckets: acc.finish(),
                overflow: acc.overflow,
            }
        }
        EvalReport::Errors => {
            let graded = grade_all(&mut run, &a)?;
            let count = |f: &dyn Fn(&Graded) -> bool| graded.iter().filter(|g| f(g)).count();
            Report::Errors {
                mode: mode_name(a.mode),
                counts: ErrorCounts {
                    n: graded.len(),
                    correct: count(&|g| g.correct),
                    malformed: count(&|g| g.malformed),
                    traces_with_hallucination: count(&|g| g.hallucinated > 0),
                    hallucinated_steps: graded.iter().map(|g| u64::from(g.hallucinated)).sum(),
                    missed_deductions: count(&|g| g.missed),
                    wrong_on_provable: count(&|g| !g.correct && g.label),
                    wrong_on_unprovable: count(&|g| !g.correct && !g.label),
                },
            }
        }
        EvalReport::Marginal => {
            let path = required(&a.table, "--table", "marginal")?;
            run.input(path)?;
            let table: AblationTable = read_json(path)?;
            let components = Component::ALL
                .iter()
                .map(|&component| {
                    Ok(ComponentMarginals {
                        component,
                        cells: marginal_contribution(&table, component)?,
                    })
                })
                .collect::<hornforge::Result<_>>()?;
            Report::Marginal { components }
        }
        EvalReport::Noninferiority => {
            let path = required(&a.table, "--table", "noninferiority")?;
            run.input(path)?;
            let s: PairedSeries = read_json(path)?;
            Report::Noninferiority {
                margin: a.margin,
                result: non_inferiority(&s.direct, &s.cot, a.margin)?,
            }
        }
    };
    emit(&run, &report, a.out.as_deref())
}
