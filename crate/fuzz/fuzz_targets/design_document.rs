#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(doc) = designcoder::metadata::parse_design_document(data) {
        let _ = serde_json::to_vec(&doc);
    }
});
