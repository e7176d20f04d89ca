#![no_main]

use libfuzzer_sys::fuzz_target;
use stereo_follow::sim::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Parsing plus full validation must never panic on arbitrary input.
    let _ = Scenario::from_toml_str(text);
});
