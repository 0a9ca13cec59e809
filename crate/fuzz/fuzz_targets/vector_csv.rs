//! `--x` coordinate lists. Accepted vectors must survive the 17-digit writer.

#![no_main]
use isostab::report::{format_vector_csv, parse_vector_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(v) = parse_vector_csv(text) else {
        return;
    };
    assert!(v.is_finite());
    let back = parse_vector_csv(&format_vector_csv(&v)).expect("formatted vector reparses");
    let bits = |x: &[f64]| x.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.as_slice()), bits(v.as_slice()));
});
