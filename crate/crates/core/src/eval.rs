//! Grading and the comparison statistics behind ablation tables.
//!
//! CoT traces are replayed against the problem: a step is hallucinated when
//! no rule whose premises are all known concludes it. Hallucinated steps do
//! not enter the known set, and the whole trace is graded rather than
//! stopping at the first bad step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::encode::VocabLayout;
use crate::error::{Error, Result};
use crate::logic::{reachable_closure, Predicate, Problem};
use crate::stats::paired_t;

pub const SIGNIFICANCE: f64 = 0.05;
pub const NON_INFERIORITY_MARGIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectGrade {
    pub correct: bool,
    pub malformed: bool,
}

pub fn grade_direct(predicted: u16, label: bool) -> DirectGrade {
    match VocabLayout::answer_label(predicted) {
        Some(answer) => DirectGrade {
            correct: answer == label,
            malformed: false,
        },
        None => DirectGrade {
            correct: false,
            malformed: true,
        },
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceGrade {
    pub final_correct: bool,
    pub hallucinated_steps: u32,
    pub missed_deduction: bool,
    pub steps_checked: u32,
    /// No answer token, or a token that is neither a predicate nor structural.
    pub malformed: bool,
}

/// Grades a CoT branch: predicate steps, optional separators, then the answer.
///
/// A leading CoT task token is skipped and everything after the answer is
/// ignored.
pub fn grade_cot(trace: &[u16], problem: &Problem) -> TraceGrade {
    let q = problem.query();
    let truth = reachable_closure(&problem.fact_set(), problem.rules()).contains(q);
    let mut known = problem.fact_set();
    let mut grade = TraceGrade::default();
    let mut answer = None;
    let body = match trace.first() {
        Some(&VocabLayout::TASK_COT) => &trace[1..],
        _ => trace,
    };
    for &tok in body {
        if let Some(a) = VocabLayout::answer_label(tok) {
            answer = Some(a);
            break;
        }
        if tok == VocabLayout::STEP_SEP || tok == VocabLayout::EOS {
            continue;
        }
        let Ok(p) = Predicate::new(u32::from(tok)) else {
            grade.malformed = true;
            continue;
        };
        grade.steps_checked += 1;
        let supported = problem
            .rules()
            .iter()
            .any(|r| r.conclusion() == p && known.contains_all(r.premise_set()));
        if supported {
            known.insert(p);
        } else {
            grade.hallucinated_steps += 1;
        }
    }
    match answer {
        Some(a) => {
            grade.final_correct = a == truth;
            grade.missed_deduction = truth && (!a || !known.contains(q));
        }
        None => {
            grade.malformed = true;
            grade.missed_deduction = truth && !known.contains(q);
        }
    }
    grade
}

/// Ablated components, as bits of a configuration index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Corrective,
    Bidirectional,
    R2,
    Ffn,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::Corrective,
        Component::Bidirectional,
        Component::R2,
        Component::Ffn,
    ];

    pub fn bit(self) -> u8 {
        1 << self as u8
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrective" => Ok(Component::Corrective),
            "bidirectional" => Ok(Component::Bidirectional),
            "r2" => Ok(Component::R2),
            "ffn" => Ok(Component::Ffn),
            other => Err(Error::InvalidParams(format!("unknown component {other:?}"))),
        }
    }
}

/// Accuracy per configuration (bitset over [`Component`]) per evaluation cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub cells: Vec<String>,
    pub accuracy: BTreeMap<u8, Vec<f64>>,
}

impl AblationTable {
    pub fn validate(&self) -> Result<()> {
        for config in 0u8..16 {
            match self.accuracy.get(&config) {
                None => return Err(Error::MissingConfiguration(config)),
                Some(row) if row.len() != self.cells.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: self.cells.len(),
                        got: row.len(),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(&extra) = self.accuracy.keys().find(|&&k| k >= 16) {
            return Err(Error::InvalidParams(format!("configuration {extra} out of range")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub cell: String,
    pub delta: f64,
    pub stdev: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// Mean with-minus-without difference over the 8 configuration pairs that
/// differ only in `component`, with a two-tailed paired t-test, per cell.
pub fn marginal_contribution(table: &AblationTable, component: Component) -> Result<Vec<Marginal>> {
    table.validate()?;
    let bit = component.bit();
    (0..table.cells.len())
        .map(|cell| {
            let diffs: Vec<f64> = (0u8..16)
                .filter(|c| c & bit == 0)
                .map(|without| table.accuracy[&(without | bit)][cell] - table.accuracy[&without][cell])
                .collect();
            let test = paired_t(&diffs, 0.0)?;
            let p = test.p_two_sided();
            Ok(Marginal {
                cell: table.cells[cell].clone(),
                delta: test.mean,
                stdev: test.sd,
                t: test.t,
                p,
                significant: p < SIGNIFICANCE,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonInferiority {
    pub mean_gap: f64,
    pub t: f64,
    pub p: f64,
    pub non_inferior: bool,
}

/// One-sided paired test that CoT beats direct by less than `margin`.
///
/// Pairs are per-depth accuracies. Rejecting `mean(cot − direct) ≥ margin`
/// at the 5% level means direct answering is non-inferior.
pub fn non_inferiority(direct: &[f64], cot: &[f64], margin: f64) -> Result<NonInferiority> {
    if direct.len() != cot.len() {
        return Err(Error::DimensionMismatch {
            expected: direct.len(),
            got: cot.len(),
        });
    }
    let diffs: Vec<f64> = cot.iter().zip(direct).map(|(c, d)| c - d).collect();
    let test = paired_t(&diffs, margin)?;
    let p = test.p_less();
    Ok(NonInferiority {
        mean_gap: test.mean,
        t: test.t,
        p,
        non_inferior: p < SIGNIFICANCE,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthBucket {
    pub lo: u32,
    pub hi: u32,
    pub count: u64,
    pub correct: u64,
    /// `None` for an empty bucket.
    pub accuracy: Option<f64>,
}

/// Streaming per-depth accuracy over buckets `(edges[i-1], edges[i]]`, with
/// the first bucket starting at depth 0 inclusive.
#[derive(Clone, Debug)]
pub struct DepthAccumulator {
    edges: Vec<u32>,
    count: Vec<u64>,
    correct: Vec<u64>,
    /// Samples deeper than the last edge.
    pub overflow: u64,
}

impl DepthAccumulator {
    pub fn new(edges: &[u32]) -> Result<Self> {
        if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("bucket edges must be strictly increasing".into()));
        }
        Ok(DepthAccumulator {
            edges: edges.to_vec(),
            count: vec![0; edges.len()],
            correct: vec![0; edges.len()],
            overflow: 0,
        })
    }

    pub fn push(&mut self, correct: bool, delta: u32) {
        match self.edges.iter().position(|&e| delta <= e) {
            Some(i) => {
                self.count[i] += 1;
                self.correct[i] += u64::from(correct);
            }
            None => self.overflow += 1,
        }
    }

    pub fn finish(&self) -> Vec<DepthBucket> {
        (0..self.edges.len())
            .map(|i| DepthBucket {
                lo: if i == 0 { 0 } else { self.edges[i - 1] + 1 },
                hi: self.edges[i],
                count: self.count[i],
                correct: self.correct[i],
                accuracy: (self.count[i] > 0).then(|| self.correct[i] as f64 / self.count[i] as f64),
            })
            .collect()
    }
}

pub fn accuracy_by_depth(grades: &[bool], deltas: &[u32], edges: &[u32]) -> Result<Vec<DepthBucket>> {
    if grades.len() != deltas.len() {
        return Err(Error::DimensionMismatch {
            expected: grades.len(),
            got: deltas.len(),
        });
    }
    let mut acc = DepthAccumulator::new(edges)?;
    for (&g, &d) in grades.iter().zip(deltas) {
        acc.push(g, d);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::VocabLayout as V;

    fn chain_example() -> Problem {
        Problem::from_ids(&[0, 2], &[(&[0, 2], 4), (&[4], 3), (&[3], 1)], 3).unwrap()
    }

    #[test]
    fn direct_grading() {
        assert!(grade_direct(V::PROVABLE, true).correct);
        assert!(!grade_direct(V::UNPROVABLE, true).correct);
        let g = grade_direct(V::EOS, true);
        assert!(!g.correct && g.malformed);
    }

    #[test]
    fn cot_examples() {
        let p = chain_example();
        let g = grade_cot(&[4, 3, V::PROVABLE], &p);
        assert!(g.final_correct);
        assert_eq!(g.hallucinated_steps, 0);
        assert!(!g.missed_deduction);
        assert_eq!(g.steps_checked, 2);

        let g = grade_cot(&[7, V::PROVABLE], &p);
        assert_eq!(g.hallucinated_steps, 1);

        let g = grade_cot(&[V::UNPROVABLE], &p);
        assert!(g.missed_deduction);
        assert!(!g.final_correct);

        let g = grade_cot(&[4, V::STEP_SEP], &p);
        assert!(g.malformed && !g.final_correct);
    }

    #[test]
    fn out_of_order_step_is_hallucinated() {
        let g = grade_cot(&[3, 4, V::PROVABLE], &chain_example());
        // 3 comes before 4 is known; 4 itself is fine.
        assert_eq!(g.hallucinated_steps, 1);
        assert!(g.missed_deduction);
    }

    fn table(f: impl Fn(u8) -> f64) -> AblationTable {
        AblationTable {
            cells: vec!["all".into()],
            accuracy: (0u8..16).map(|c| (c, vec![f(c)])).collect(),
        }
    }

    #[test]
    fn marginal_examples() {
        let flat = marginal_contribution(&table(|_| 0.7), Component::R2).unwrap();
        assert_eq!(flat[0].delta, 0.0);
        assert!(!flat[0].significant);
        let bump = marginal_contribution(&table(|c| if c & 4 != 0 { 80.0 } else { 70.0 }), Component::R2).unwrap();
        assert_eq!(bump[0].delta, 10.0);
        assert!(bump[0].significant);
        let mut broken = table(|_| 0.5);
        broken.accuracy.remove(&0b1010);
        assert!(matches!(
            marginal_contribution(&broken, Component::Ffn),
            Err(Error::MissingConfiguration(0b1010))
        ));
    }

    #[test]
    fn non_inferiority_examples() {
        let d = [0.9, 0.8, 0.7, 0.6];
        assert!(non_inferiority(&d, &d, NON_INFERIORITY_MARGIN).unwrap().non_inferior);
        let cot: Vec<f64> = d.iter().map(|x| x + 0.2).collect();
        assert!(!non_inferiority(&d, &cot, NON_INFERIORITY_MARGIN).unwrap().non_inferior);
        assert!(non_inferiority(&d[..1], &d[..1], NON_INFERIORITY_MARGIN).is_err());
    }

    #[test]
    fn depth_table() {
        let b = accuracy_by_depth(&[true; 4], &[0, 3, 7, 12], &[6, 12]).unwrap();
        assert_eq!(b[0].accuracy, Some(1.0));
        assert_eq!(b[1].count, 2);
        let b = accuracy_by_depth(&[true, false, true, false], &[1, 2, 3, 4], &[6, 12]).unwrap();
        assert_eq!(b[0].accuracy, Some(0.5));
        assert_eq!(b[1].accuracy, None);
    }
}
