//! Replays the fuzz corpus seeds through the parsers outside of libFuzzer.

use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let data = std::fs::read(&p).unwrap();
            (p, data)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn scenario_seeds() {
    for (path, data) in seeds("scenario") {
        let s = starmod::runner::Scenario::from_str(std::str::from_utf8(&data).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if s.construction.is_some() {
            s.build_module().unwrap();
        }
    }
}

#[test]
fn bimodule_seeds_round_trip() {
    for (path, data) in seeds("bimodule") {
        let m = starmod::io::parse_bimodule_str(std::str::from_utf8(&data).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let text = serde_json::to_string(&starmod::io::bimodule_to_json(&m)).unwrap();
        assert_eq!(text.as_bytes(), &data[..], "{}", path.display());
    }
}

#[test]
fn algebra_element_seeds() {
    let mut parsed = 0;
    for (_, data) in seeds("algebra_element") {
        let v: serde_json::Value = serde_json::from_slice(&data).unwrap();
        let Ok(alg) = starmod::io::parse_algebra(&v["algebra"]) else { continue };
        if let Ok(x) = starmod::io::parse_element(&alg, &v["element"]) {
            assert_eq!(starmod::io::parse_element(&alg, &starmod::io::element_to_json(&x)).unwrap(), x);
            parsed += 1;
        }
    }
    assert_eq!(parsed, 2);
}
