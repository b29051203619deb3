#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = designcoder::grouping::parse_divisions_response(text);
});
