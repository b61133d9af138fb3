#![no_main]
use affectlab::data::parse_signal_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(channels) = parse_signal_csv(text) {
        let n = channels[0].len();
        assert!(channels.iter().all(|c| c.len() == n));
    }
});
