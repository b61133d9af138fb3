#![no_main]
use affectlab::embedding::{encode_response, parse_response};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_response(data, None, None) {
        if let Some(first) = rows.first() {
            let dim = first.len();
            let bytes = encode_response(&rows, dim);
            assert_eq!(
                parse_response(&bytes, Some(rows.len()), Some(dim)).expect("re-parse"),
                rows
            );
        }
    }
});
