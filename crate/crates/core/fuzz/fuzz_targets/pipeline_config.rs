#![no_main]

use libfuzzer_sys::fuzz_target;
use patchforge::pipeline::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = PipelineConfig::parse(text) {
        let _ = cfg.validate();
        let _ = PipelineConfig::parse(&cfg.to_toml());
    }
});
