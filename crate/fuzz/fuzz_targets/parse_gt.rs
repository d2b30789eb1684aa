#![no_main]
use libfuzzer_sys::fuzz_target;

use prpca::io::{parse_gt, write_gt};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(boxes) = parse_gt(text) {
        for b in &boxes {
            assert!(b.w > 0.0 && b.h > 0.0);
        }
        // Whatever parses must survive a write/read cycle unchanged.
        assert_eq!(parse_gt(&write_gt(&boxes)).unwrap(), boxes);
    }
});
