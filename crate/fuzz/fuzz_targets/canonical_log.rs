#![no_main]

use libfuzzer_sys::fuzz_target;
use stereo_follow::detection::{parse_canonical_frames, write_canonical_frames};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(frames) = parse_canonical_frames(text) {
        // Anything we accept must survive a write/parse round trip.
        let rewritten = write_canonical_frames(&frames);
        let reparsed = parse_canonical_frames(&rewritten).expect("rewritten log must parse");
        assert_eq!(frames, reparsed);
    }
});
