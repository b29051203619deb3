#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(store) = designcoder::llm::TranscriptStore::parse(text) {
        let again = designcoder::llm::TranscriptStore::parse(&store.to_jsonl()).expect("serialized store parses");
        assert_eq!(again.len(), store.len());
    }
});
