use hornforge::generators::{bucket_tag, LabeledProblem};
use hornforge::logic::forward_chain;
use hornforge::r2::{r2_augment, Strategy};
use hornforge::rng::stream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::files::{jsonl_bytes, read_jsonl, Run};
use crate::AugmentArgs;

/// A counterfactual and the example it was derived from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub original_id: usize,
    #[serde(flatten)]
    pub example: LabeledProblem,
    pub strategy: Strategy,
    pub flipped: bool,
    #[serde(default)]
    pub iterations: u32,
}

pub fn run(a: AugmentArgs) -> Result<()> {
    let mut run = Run::start();
    run.seed("epoch_seed", a.epoch_seed);
    run.input(&a.input)?;
    let data: Vec<LabeledProblem> = read_jsonl(&a.input)?;
    let out: Vec<AugmentedRecord> = data
        .par_iter()
        .enumerate()
        .map(|(i, lp)| {
            let r = r2_augment(&lp.problem, lp.label, a.dataset_kind, &mut stream(a.epoch_seed, i as u64))
                .map_err(|source| CliError::Data {
                    context: format!("example {i}: "),
                    source,
                })?;
            let res = forward_chain(&r.counterfactual);
            Ok(AugmentedRecord {
                original_id: i,
                example: LabeledProblem {
                    bucket: bucket_tag(res.delta, res.provable),
                    problem: r.counterfactual,
                    label: res.provable,
                    delta: res.delta,
                },
                strategy: r.strategy,
                flipped: r.flipped,
                iterations: r.iterations,
            })
        })
        .collect::<Result<_>>()?;
    run.output(&a.out, &jsonl_bytes(&out))?;
    let flipped = out.iter().filter(|r| r.flipped).count();
    eprintln!("{flipped}/{} counterfactuals flipped the label", out.len());
    Ok(())
}
