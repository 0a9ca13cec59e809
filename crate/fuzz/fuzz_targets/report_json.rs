//! Report documents as read back by downstream tooling.

#![no_main]
use isostab::report::{parse_report, Report};
use libfuzzer_sys::fuzz_target;

const MAX_INPUT_SIZE: usize = 256 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(report) = parse_report(text) else {
        return;
    };
    let rewritten = Report::new(report.manifest.clone(), report.payload.clone()).to_json();
    let again = parse_report(&rewritten).expect("rewritten report reparses");
    assert_eq!(again, report);
});
