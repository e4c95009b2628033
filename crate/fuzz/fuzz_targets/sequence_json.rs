//! Fuzzes the kernel-sequence file format used by `chaoskit fmt --sequence`:
//! a JSON array of kernel objects. Parsing must never panic, and accepted
//! sequences must re-serialize losslessly kernel by kernel.

#![no_main]

use chaoskit::tensor::Kernel;
use chaoskit_cli::parse_kernel_sequence;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(kernels) = parse_kernel_sequence(text) else {
        return;
    };
    for kernel in &kernels {
        let reparsed = Kernel::from_json(&kernel.to_json()).expect("canonical form re-parses");
        assert_eq!(
            reparsed.max_abs_diff(kernel).expect("same shape"),
            0.0,
            "round trip changed coefficients"
        );
    }
});
