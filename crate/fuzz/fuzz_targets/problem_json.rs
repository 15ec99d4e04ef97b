#![no_main]

use hornforge::generators::LabeledProblem;
use hornforge::Problem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = serde_json::from_slice::<Problem>(data) {
        // Anything accepted must solve and round-trip.
        let _ = hornforge::logic::forward_chain(&p);
        let back: Problem = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
    let _ = serde_json::from_slice::<LabeledProblem>(data);
});
