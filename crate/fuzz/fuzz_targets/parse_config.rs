#![no_main]
use libfuzzer_sys::fuzz_target;

use prpca::io::{config_to_toml, parse_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        assert!(cfg.validate().is_ok());
        assert_eq!(parse_config(&config_to_toml(&cfg)).unwrap(), cfg);
    }
});
