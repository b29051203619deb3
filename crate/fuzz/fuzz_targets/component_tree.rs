#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(tree) = designcoder::grouping::ComponentTree::from_json(text) {
        let again = designcoder::grouping::ComponentTree::from_json(&tree.to_json()).expect("serialized tree parses");
        assert_eq!(again, tree);
    }
});
