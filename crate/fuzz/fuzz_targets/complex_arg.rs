//! Fuzzes the "re,im" complex-number argument parser. Parsing must never
//! panic, accepted values must be finite, and printing an accepted value
//! must parse back bit for bit.

#![no_main]

use chaoskit_cli::parse_complex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(z) = parse_complex(text) else {
        return;
    };
    assert!(z.re.is_finite() && z.im.is_finite(), "accepted a non-finite value");
    let printed = format!("{},{}", z.re, z.im);
    let again = parse_complex(&printed).expect("printed form re-parses");
    assert_eq!(again.re.to_bits(), z.re.to_bits(), "real part did not round trip");
    assert_eq!(again.im.to_bits(), z.im.to_bits(), "imaginary part did not round trip");
});
