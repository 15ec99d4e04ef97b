#![no_main]

use hornforge::encode::{read_file, write_file};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((header, seqs)) = read_file(data) {
        let mut buf = Vec::new();
        if write_file(&mut buf, header.format, &seqs).is_ok() {
            assert_eq!(read_file(&buf).unwrap().1, seqs);
        }
    }
});
