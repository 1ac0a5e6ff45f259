#![no_main]

use libfuzzer_sys::fuzz_target;
use recovering_bandits::harness::RunRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = RunRecord::from_json_slice(data) {
        let json = rec.to_json().expect("serialize accepted record");
        let back = RunRecord::from_json_str(&json).expect("reparse record");
        assert_eq!(back.to_json().unwrap(), json);
        let _ = rec.final_metric();
        let _ = rec.duality_gap();
    }
});
