#![no_main]

use lbvh::cloud_io::{read_csv, write_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_csv(data) {
        let mut text = Vec::new();
        write_csv(&mut text, &points).unwrap();
        assert_eq!(read_csv(&text).unwrap(), points);
    }
});
