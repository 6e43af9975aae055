#![no_main]

use libfuzzer_sys::fuzz_target;
use patchforge::dataset::{parse_jsonl, ArtifactRecord, VqaSample};
use patchforge::evaluation::{rasterize, BenchmarkEntry, Prediction};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_jsonl::<ArtifactRecord>(text, "fuzz") {
        for r in &records {
            let _ = r.validate();
        }
    }
    let _ = parse_jsonl::<VqaSample>(text, "fuzz");
    let _ = parse_jsonl::<BenchmarkEntry>(text, "fuzz");
    if let Ok(preds) = parse_jsonl::<Prediction>(text, "fuzz") {
        for p in &preds {
            for r in &p.regions {
                let _ = rasterize(r, 0.5);
            }
        }
    }
});
