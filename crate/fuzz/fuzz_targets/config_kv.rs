//! Fuzzes the key=value config-file parser. Parsing must never panic, and a
//! parsed map reprinted as `key=value` lines must parse back to itself.

#![no_main]

use chaoskit_cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(map) = parse_config(text) else {
        return;
    };
    let printed: String = map
        .iter()
        .map(|(key, value)| format!("{key}={value}\n"))
        .collect();
    let again = parse_config(&printed).expect("printed config re-parses");
    assert_eq!(map, again, "config map did not round trip");
});
