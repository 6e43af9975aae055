#![no_main]

use libfuzzer_sys::fuzz_target;
use patchforge::injection::PixelImage;
use patchforge::perception::BinaryMask;

fuzz_target!(|data: &[u8]| {
    let _ = PixelImage::from_png_bytes(data);
    let _ = BinaryMask::from_png_bytes(data);
});
