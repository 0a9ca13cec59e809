//! Map file parsing: arbitrary text through the TOML reader and the family
//! validators. Accepted specs must round-trip and evaluate without panics.

#![no_main]
use isostab::{Map, MapSpec, Vector};
use libfuzzer_sys::fuzz_target;

const MAX_INPUT_SIZE: usize = 64 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = MapSpec::from_toml_str(text) else {
        return;
    };
    let back = MapSpec::from_toml_str(&spec.to_toml_string()).expect("serialized spec reparses");
    assert_eq!(back, spec);

    let map = Map::new(spec).expect("validated spec builds");
    let m = map.dim_in();
    let origin = map.eval(&Vector::zeros(m)).expect("origin evaluates");
    assert!(origin.as_slice().iter().all(|c| *c == 0.0), "f(0) = {origin:?}");
    for i in 0..m {
        for scale in [1e-3, 1.0, 1e6] {
            let x = Vector::basis(i, m).scale(scale);
            let fx = map.eval(&x).expect("finite point evaluates");
            assert_eq!(fx.dim(), map.dim_out());
        }
    }
});
