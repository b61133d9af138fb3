#![no_main]
use affectlab::learn::Model;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = Model::from_bytes(data) {
        let bytes = m.to_bytes();
        let again = Model::from_bytes(&bytes).expect("re-decode");
        assert_eq!(again.to_bytes(), bytes);
    }
});
