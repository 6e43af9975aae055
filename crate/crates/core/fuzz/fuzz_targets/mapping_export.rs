#![no_main]

use libfuzzer_sys::fuzz_target;
use patchforge::toolbox::MappingExport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(export) = MappingExport::parse(text) {
        // A parsed export is valid, so it must rebuild and survive a round trip.
        export.to_mapping().unwrap();
        assert_eq!(MappingExport::parse(&export.to_json()).unwrap(), export);
    }
});
