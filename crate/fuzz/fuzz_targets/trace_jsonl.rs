#![no_main]

use libfuzzer_sys::fuzz_target;
use stereo_follow::Trace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(trace) = Trace::from_jsonl(text) {
        let reparsed = Trace::from_jsonl(&trace.to_jsonl()).expect("rewritten trace parses");
        assert_eq!(trace, reparsed);
    }
});
