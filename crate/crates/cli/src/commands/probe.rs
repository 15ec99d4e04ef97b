//! Probes over a directory of exported hidden states.
//!
//! Layer maps are fitted on a 10% calibration split of the exported examples
//! and every report is computed on the remaining ones. The readout file holds
//! the final RMSNorm weights and the unembedding rows, with `w_correct` the
//! PROVABLE row and `w_incorrect` the UNPROVABLE row.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hornforge::generators::LabeledProblem;
use hornforge::logic::{forward_chain, Predicate, VOCAB_SIZE};
use hornforge::probe::{
    calibration_split, decision_trace, fit_layer_maps, type_similarity, F1Accumulator, HiddenStates, LayerF1, Readout,
};
use hornforge::rng::stream;
use hornforge::Error;
use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics};

use super::emit;
use crate::error::{CliError, Result};
use crate::files::{io_err, read_json, read_jsonl, Run};
use crate::{ProbeArgs, ProbeReport};

fn sidecars(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.ends_with(".json") && name != "readout.json" && !name.ends_with(".manifest.json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

struct Example {
    states: HiddenStates,
    data: LabeledProblem,
}

#[derive(Serialize)]
struct TraceRow {
    layer: usize,
    median: f64,
    q1: f64,
    q3: f64,
}

#[derive(Serialize)]
struct TypeRow {
    layer: usize,
    type_index: u8,
    raw: f64,
    aligned: f64,
    count: usize,
}

#[derive(Serialize)]
#[serde(tag = "report", rename_all = "lowercase")]
enum Report {
    Trace {
        calibration: usize,
        evaluated: usize,
        layers: Vec<TraceRow>,
    },
    F1 {
        calibration: usize,
        evaluated: usize,
        layers: Vec<LayerF1>,
    },
    Typesim {
        calibration: usize,
        evaluated: usize,
        rows: Vec<TypeRow>,
    },
}

/// Last statement position: the state that predicts the answer.
fn answer_position(states: &HiddenStates) -> usize {
    let meta = &states.meta.token_meta;
    meta.iter().rposition(|m| m.segment == 0).unwrap_or(states.tokens() - 1)
}

pub fn run(a: ProbeArgs) -> Result<()> {
    let mut run = Run::start();
    run.seed("seed", a.seed);
    run.input(&a.dataset)?;
    let dataset: Vec<LabeledProblem> = read_jsonl(&a.dataset)?;
    let readout_path = a.readout.clone().unwrap_or_else(|| a.states.join("readout.json"));
    run.input(&readout_path)?;
    let readout: Readout = read_json(&readout_path)?;

    let mut examples = Vec::new();
    for (i, side) in sidecars(&a.states)?.into_iter().enumerate() {
        let side_bytes = run.input(&side)?;
        let data_path = side.with_extension("f32");
        let data_bytes = run.input(&data_path)?;
        let states = HiddenStates::decode(&side_bytes, &data_bytes).map_err(|source| CliError::Data {
            context: format!("{}: ", side.display()),
            source,
        })?;
        if states.tokens() == 0 {
            return Err(Error::Degenerate(format!("{} has no tokens", side.display())).into());
        }
        let idx = states.meta.example.unwrap_or(i);
        let data = dataset
            .get(idx)
            .cloned()
            .ok_or_else(|| Error::InvalidParams(format!("{} refers to example {idx} of {}", side.display(), dataset.len())))?;
        examples.push(Example { states, data });
    }
    if examples.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 exported examples, found {}", examples.len())).into());
    }

    let (cal, eval) = calibration_split(examples.len(), &mut stream(a.seed, 0));
    let cal_states: Vec<HiddenStates> = cal.iter().map(|&i| examples[i].states.clone()).collect();
    let maps = fit_layer_maps(&cal_states)?;
    readout.pair.validate(examples[0].states.dim())?;
    let layers = maps.len();
    let (calibration, evaluated) = (cal.len(), eval.len());

    let report = match a.report {
        ProbeReport::Trace => {
            let mut per_layer = vec![Vec::with_capacity(eval.len()); layers];
            for &i in &eval {
                let ex = &examples[i];
                let t = answer_position(&ex.states);
                for (l, map) in maps.iter().enumerate() {
                    let p = decision_trace(&ex.states.state_f64(l, t), map, &readout.pair);
                    per_layer[l].push(if ex.data.label { p } else { 1.0 - p });
                }
            }
            let rows = per_layer
                .into_iter()
                .enumerate()
                .map(|(layer, v)| {
                    let mut d = Data::new(v);
                    TraceRow {
                        layer,
                        median: d.median(),
                        q1: d.lower_quartile(),
                        q3: d.upper_quartile(),
                    }
                })
                .collect();
            Report::Trace {
                calibration,
                evaluated,
                layers: rows,
            }
        }
        ProbeReport::F1 => {
            let mut acc = F1Accumulator::new(layers);
            for &i in &eval {
                let ex = &examples[i];
                if ex.states.meta.token_meta.len() != ex.states.tokens() {
                    return Err(Error::InvalidParams("f1 report needs token_meta for every token".into()).into());
                }
                let derived = *forward_chain(&ex.data.problem).derived();
                let truth: Vec<Option<bool>> = ex
                    .states
                    .meta
                    .token_meta
                    .iter()
                    .map(|m| {
                        ((m.token as usize) < VOCAB_SIZE)
                            .then(|| derived.contains(Predicate::new(u32::from(m.token)).expect("checked range")))
                    })
                    .collect();
                acc.push(&ex.states, &maps, &readout.pair, &truth)?;
            }
            Report::F1 {
                calibration,
                evaluated,
                layers: acc.finish(),
            }
        }
        ProbeReport::Typesim => {
            let rows = readout
                .type_rows
                .as_ref()
                .ok_or_else(|| Error::InvalidParams("typesim report needs type_rows in the readout".into()))?;
            let mut sums: BTreeMap<(usize, u8), (f64, f64, usize)> = BTreeMap::new();
            for &i in &eval {
                for s in type_similarity(&examples[i].states, &maps, rows)? {
                    let e = sums.entry((s.layer, s.type_index)).or_default();
                    e.0 += s.raw * s.count as f64;
                    e.1 += s.aligned * s.count as f64;
                    e.2 += s.count;
                }
            }
            Report::Typesim {
                calibration,
                evaluated,
                rows: sums
                    .into_iter()
                    .map(|((layer, type_index), (raw, aligned, count))| TypeRow {
                        layer,
                        type_index,
                        raw: raw / count as f64,
                        aligned: aligned / count as f64,
                        count,
                    })
                    .collect(),
            }
        }
    };
    emit(&run, &report, a.out.as_deref())
}
