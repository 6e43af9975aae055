#![no_main]

use libfuzzer_sys::fuzz_target;
use patchforge::perception::Rle;

// First four bytes pick the mask size, the rest is the counts string.
fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let h = u16::from_le_bytes([data[0], data[1]]) as u32 % 512;
    let w = u16::from_le_bytes([data[2], data[3]]) as u32 % 512;
    let Ok(s) = std::str::from_utf8(&data[4..]) else {
        return;
    };
    if let Ok(rle) = Rle::from_coco_string(h, w, s) {
        let mask = rle.decode();
        let again = Rle::encode(&mask);
        assert_eq!(again.decode(), mask);
        let reparsed = Rle::from_coco_string(h, w, &again.to_coco_string()).unwrap();
        assert_eq!(reparsed, again);
    }
});
