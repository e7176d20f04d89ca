#![no_main]

use libfuzzer_sys::fuzz_target;
use stereo_follow::Template;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(template) = Template::from_json(text) {
        // Accepted templates round-trip bit-exactly.
        let reparsed = Template::from_json(&template.to_json()).expect("rewritten template parses");
        assert_eq!(template, reparsed);
    }
});
