use hornforge::encode::{read_file, Segment};
use hornforge::masks::{causal_mask, isolated_corrective_mask, prefix_bidirectional_mask, segment_string, write_mask, AttentionMask};

use crate::error::{CliError, Result};
use crate::files::Run;
use crate::{MaskKind, MasksArgs};

fn build(kind: MaskKind, segments: &[Segment]) -> hornforge::Result<AttentionMask> {
    match kind {
        MaskKind::Causal => causal_mask(segments.len()),
        MaskKind::Prefix => prefix_bidirectional_mask(segments),
        MaskKind::Isolated => isolated_corrective_mask(segments),
    }
}

/// Half prefix, then the direct and CoT branches splitting the rest.
fn demo_segments(n: usize) -> Vec<Segment> {
    let prefix = n.div_ceil(2);
    let direct = (n - prefix).div_ceil(2);
    (0..n)
        .map(|i| match i {
            i if i < prefix => Segment::Prefix,
            i if i < prefix + direct => Segment::DirectBranch,
            _ => Segment::CotBranch,
        })
        .collect()
}

pub fn run(a: MasksArgs) -> Result<()> {
    if let Some(n) = a.demo {
        if n == 0 {
            return Err(CliError::Usage("--demo needs a positive length".into()));
        }
        let segs = demo_segments(n);
        let mask = build(a.kind, &segs)?;
        println!("{}", segment_string(&segs));
        print!("{}", mask.ascii());
        if let Some(out) = &a.out {
            let mut buf = Vec::new();
            write_mask(&mut buf, &mask)?;
            Run::start().output(out, &buf)?;
        }
        return Ok(());
    }
    let (Some(path), Some(out)) = (&a.encoded, &a.out) else {
        return Err(CliError::Usage("--encoded needs --out".into()));
    };
    let mut run = Run::start();
    let bytes = run.input(path)?;
    let (_, seqs) = read_file(&bytes)?;
    let seq = seqs
        .get(a.index)
        .ok_or_else(|| CliError::Usage(format!("--index {} but the file holds {} records", a.index, seqs.len())))?;
    let mask = build(a.kind, &seq.segments)?;
    let mut buf = Vec::new();
    write_mask(&mut buf, &mask)?;
    run.output(out, &buf)?;
    Ok(())
}
