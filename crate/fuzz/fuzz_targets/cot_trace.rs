#![no_main]

use hornforge::eval::grade_cot;
use hornforge::Problem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let problem = Problem::from_ids(&[0, 2], &[(&[0, 2], 4), (&[4], 3), (&[3], 1)], 3).unwrap();
    let trace: Vec<u16> = data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    let g = grade_cot(&trace, &problem);
    assert!(g.hallucinated_steps <= g.steps_checked);
});
