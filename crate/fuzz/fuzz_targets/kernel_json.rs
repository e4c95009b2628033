//! Fuzzes the kernel JSON decoder: arbitrary bytes must never panic, and
//! every accepted kernel must survive a serialize/parse round trip exactly.

#![no_main]

use chaoskit::tensor::Kernel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(kernel) = Kernel::from_json(text) else {
        return;
    };
    let canonical = kernel.to_json();
    let reparsed = Kernel::from_json(&canonical).expect("canonical form re-parses");
    assert_eq!(
        reparsed.max_abs_diff(&kernel).expect("same shape"),
        0.0,
        "round trip changed coefficients"
    );
});
