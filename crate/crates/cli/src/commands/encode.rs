use hornforge::encode::{encode, write_file};
use hornforge::generators::LabeledProblem;
use hornforge::logic::forward_chain;
use hornforge::Error;
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::files::{read_jsonl, Run};
use crate::EncodeArgs;

pub fn run(a: EncodeArgs) -> Result<()> {
    let mut run = Run::start();
    run.input(&a.input)?;
    let data: Vec<LabeledProblem> = read_jsonl(&a.input)?;
    let seqs = data
        .par_iter()
        .enumerate()
        .map(|(i, lp)| {
            let res = forward_chain(&lp.problem);
            if res.provable != lp.label {
                return Err(CliError::Data {
                    context: format!("example {i}: "),
                    source: Error::InvalidProblem(format!("label {} disagrees with the solver", lp.label as u8)),
                });
            }
            encode(a.format, &lp.problem, &res.trace, lp.label).map_err(|source| CliError::Data {
                context: format!("example {i}: "),
                source,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    let header = write_file(&mut buf, a.format, &seqs)?;
    run.output(&a.out, &buf)?;
    eprintln!("encoded {} sequences, {} tokens", header.count, header.total_tokens);
    Ok(())
}
