#![no_main]

use lbvh::cloud_io::{decode_pcl3, encode_pcl3};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = decode_pcl3(data) {
        // Anything that decodes must re-encode to the same bytes.
        assert_eq!(encode_pcl3(&points).unwrap(), data);
    }
});
