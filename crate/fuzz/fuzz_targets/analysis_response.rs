#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = designcoder::refine::parse_analysis_response(text);
});
