#![no_main]
use affectlab::data::DatasetManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = DatasetManifest::from_json(text, "/nonexistent") {
        let _ = m.validate(false);
        let again = DatasetManifest::from_json(&m.to_json(), "/nonexistent").expect("re-parse");
        assert_eq!(again.to_json(), m.to_json());
    }
});
