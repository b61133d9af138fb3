#![no_main]
use affectlab::embedding::parse_job;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(job) = parse_job(text) {
        assert!(!job.job_id.is_empty() && !job.job_id.contains('/'));
        assert!(job.dim > 0);
    }
});
