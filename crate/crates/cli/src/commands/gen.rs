use hornforge::generators::{balance_dataset, BucketSpec, GenParams};

use crate::error::{Context, Result};
use crate::files::{jsonl_bytes, Run};
use crate::GenArgs;

pub fn run(a: GenArgs) -> Result<()> {
    let mut run = Run::start();
    run.seed("seed", a.seed);
    let mut params = GenParams::new(a.generator, a.seed)
        .with_n_pred(a.n_pred.0, a.n_pred.1)
        .with_premises(a.premises.0, a.premises.1);
    if let Some(m) = a.max_tokens {
        params.max_tokens = m;
    }
    params.validate().context(|| "generator parameters".into())?;
    let data = balance_dataset(&params, &BucketSpec::new(a.max_delta, a.per_bucket))?;
    let m = run.output(&a.out, &jsonl_bytes(&data))?;
    eprintln!("wrote {} problems to {} (sha256 {})", data.len(), a.out.display(), m.outputs[0].sha256);
    Ok(())
}
