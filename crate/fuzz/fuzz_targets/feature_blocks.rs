#![no_main]
use affectlab::learn::{decode_blocks, encode_blocks};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(blocks) = decode_blocks(data) {
        let bytes = encode_blocks(&blocks);
        let again = decode_blocks(&bytes).expect("re-decode");
        assert_eq!(encode_blocks(&again), bytes);
    }
});
