#![no_main]
use affectlab::harness::ExperimentReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = ExperimentReport::from_json(text) {
        let _ = r.table();
        let _ = r.confusion_csv();
    }
});
