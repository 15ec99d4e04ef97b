#![no_main]

use hornforge::probe::HiddenStates;
use libfuzzer_sys::fuzz_target;

// First two bytes give the sidecar length; the rest is the float payload.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = (u16::from_le_bytes([data[0], data[1]]) as usize).min(data.len() - 2);
    let (side, payload) = data[2..].split_at(n);
    if let Ok(h) = HiddenStates::decode(side, payload) {
        assert_eq!(h.encode_data(), payload);
    }
});
