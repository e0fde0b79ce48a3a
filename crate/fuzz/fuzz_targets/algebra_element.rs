#![no_main]

use libfuzzer_sys::fuzz_target;

// Input: {"algebra": {...}, "element": [...]}
fuzz_target!(|data: &[u8]| {
    let Ok(v) = serde_json::from_slice::<serde_json::Value>(data) else { return };
    let Some(a) = v.get("algebra") else { return };
    let Ok(alg) = starmod::io::parse_algebra(a) else { return };
    if let Some(e) = v.get("element") {
        if let Ok(x) = starmod::io::parse_element(&alg, e) {
            let back = starmod::io::parse_element(&alg, &starmod::io::element_to_json(&x)).unwrap();
            assert_eq!(back, x);
        }
    }
});
