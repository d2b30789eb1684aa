#![no_main]
use libfuzzer_sys::fuzz_target;

use prpca::io::{parse_matrix, write_matrix};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix(text) {
        assert!(m.iter().all(|v| v.is_finite()));
        assert_eq!(parse_matrix(&write_matrix(&m)).unwrap(), m);
    }
});
