#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = designcoder::refine::parse_repair_response(text);
});
