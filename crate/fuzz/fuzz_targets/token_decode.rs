#![no_main]

use hornforge::encode::{decode, Segment, TokenSequence, TypeSet};
use libfuzzer_sys::fuzz_target;

// Each 4-byte chunk is one token: u16 id, type bits, then segment code with
// the loss flag in the high bit.
fuzz_target!(|data: &[u8]| {
    let mut seq = TokenSequence::default();
    for (i, c) in data.chunks_exact(4).enumerate() {
        seq.tokens.push(u16::from_le_bytes([c[0], c[1]]));
        seq.type_sets.push(TypeSet::from_bits(c[2]));
        seq.segments.push(Segment::from_code((c[3] & 0x7f) % 3).unwrap());
        seq.loss_mask.push(c[3] & 0x80 != 0);
        seq.positions.push(i as u32);
    }
    let _ = seq.validate();
    let _ = decode(&seq);
});
