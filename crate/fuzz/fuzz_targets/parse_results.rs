#![no_main]
use libfuzzer_sys::fuzz_target;

use prpca::io::parse_results;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_results(text) {
        assert!(rows.windows(2).all(|w| w[0].frame < w[1].frame));
        assert!(rows.iter().all(|r| r.bbox.validate().is_ok()));
    }
});
