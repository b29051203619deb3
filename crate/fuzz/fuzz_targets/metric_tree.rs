#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(tree) = designcoder::metrics::parse_metric_tree(data) {
        let _ = tree.edge_count();
    }
});
