#![no_main]

use libfuzzer_sys::fuzz_target;
use stereo_follow::detection::parse_native_frames;
use stereo_follow::stereo::CameraSide;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_native_frames(text, CameraSide::Left, 0.1);
});
