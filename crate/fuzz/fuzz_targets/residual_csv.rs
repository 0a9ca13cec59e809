//! Residual sample tables written by `bounds --csv`.

#![no_main]
use isostab::report::{parse_residual_csv, write_residual_csv};
use libfuzzer_sys::fuzz_target;

const MAX_INPUT_SIZE: usize = 256 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(rows) = parse_residual_csv(text) else {
        return;
    };
    for row in &rows {
        let _ = row.sample.recompute_margins(row.epsilon);
    }
    // the writer takes one epsilon for the whole table
    let Some(first) = rows.first() else {
        return;
    };
    if rows.iter().any(|r| r.epsilon.to_bits() != first.epsilon.to_bits()) {
        return;
    }
    let samples: Vec<_> = rows.iter().map(|r| r.sample.clone()).collect();
    let written = write_residual_csv(first.epsilon, &samples).expect("parsed rows rewrite");
    let again = parse_residual_csv(&written).expect("rewritten table reparses");
    assert_eq!(again, rows);
});
