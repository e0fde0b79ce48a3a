#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = starmod::io::parse_bimodule_str(s) {
            let text = serde_json::to_string(&starmod::io::bimodule_to_json(&m)).unwrap();
            starmod::io::parse_bimodule_str(&text).expect("serialized bimodule must parse");
        }
    }
});
