#![no_main]
use libfuzzer_sys::fuzz_target;

use prpca::io::{parse_curve, write_curve};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_curve(text) {
        assert_eq!(parse_curve(&write_curve(&c, "threshold", "value")).unwrap(), c);
    }
});
