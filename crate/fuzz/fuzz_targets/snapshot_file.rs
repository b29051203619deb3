#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = designcoder::refine::parse_snapshot_file(data);
});
