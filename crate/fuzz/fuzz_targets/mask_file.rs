#![no_main]

use hornforge::masks::read_mask;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = read_mask(data) {
        if mask.len() <= 64 {
            let _ = mask.ascii();
        }
    }
});
