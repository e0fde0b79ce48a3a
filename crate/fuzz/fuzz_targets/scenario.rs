#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(scenario) = starmod::runner::Scenario::from_str(s) {
            // building is bounded by the parser's size caps
            let _ = scenario.build_module();
            let _ = scenario.build_generator();
        }
    }
});
