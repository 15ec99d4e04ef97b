//! Built-in fixtures: the worked RP and LP examples and the direct encoding
//! of facts {0, 1}, rule 1 → 2, query 3.

use hornforge::encode::encode_direct;
use hornforge::logic::{forward_chain, Predicate, Problem};
use hornforge::Error;

use crate::error::Result;

fn check(name: &str, ok: bool, detail: String, failures: &mut Vec<String>) {
    println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
    if !ok {
        failures.push(name.to_string());
    }
}

pub fn run() -> Result<()> {
    let mut failures = Vec::new();

    let rp = forward_chain(&Problem::from_ids(&[0, 2], &[(&[0, 2], 4), (&[4], 3), (&[3], 1)], 3)?);
    let d1 = rp.depth(Predicate::new(1)?);
    check(
        "rp example",
        rp.provable && rp.delta == 2 && d1 == Some(3),
        format!("δ={} depth(1)={d1:?}", rp.delta),
        &mut failures,
    );
    let lp = forward_chain(&Problem::from_ids(&[5], &[(&[5], 6), (&[5], 2), (&[6, 2], 1)], 1)?);
    check("lp example", lp.provable && lp.delta == 2, format!("δ={}", lp.delta), &mut failures);

    let seq = encode_direct(&Problem::from_ids(&[0, 1], &[(&[1], 2)], 3)?, false)?;
    let sets: Vec<Vec<u8>> = seq.type_sets.iter().map(|t| t.indices().collect()).collect();
    println!();
    println!("{:>3} {:>6}  types", "pos", "token");
    for (i, (tok, set)) in seq.tokens.iter().zip(&sets).enumerate() {
        println!("{i:>3} {tok:>6}  {set:?}");
    }
    println!();
    let want: [Vec<u8>; 6] = [vec![1], vec![1], vec![3, 4], vec![3, 5], vec![8], vec![2]];
    check(
        "direct encoding",
        seq.tokens[..6] == [0, 1, 1, 2, 200, 3] && sets[..6] == want,
        format!("{:?}", &seq.tokens[..6]),
        &mut failures,
    );

    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!("selftest failed: {}", failures.join(", "))).into())
    }
}
