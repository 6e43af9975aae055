#![no_main]

use libfuzzer_sys::fuzz_target;
use patchforge::curation::Transcript;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Transcript::parse(text);
    }
});
