#![no_main]

use lbvh::CloudKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(kind) = s.parse::<CloudKind>() {
            assert_eq!(kind.to_string().parse::<CloudKind>().unwrap(), kind);
        }
    }
});
