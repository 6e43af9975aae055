#![no_main]

use libfuzzer_sys::fuzz_target;
use patchforge::curation::parse_yes_no;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_yes_no(&text);
});
