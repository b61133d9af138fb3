#![no_main]
use affectlab::layout::ScalpLayout;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(l) = ScalpLayout::from_json(text) {
        assert_eq!(ScalpLayout::from_json(&l.to_json()).expect("re-parse"), l);
    }
});
