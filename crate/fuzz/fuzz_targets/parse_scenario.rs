#![no_main]

use libfuzzer_sys::fuzz_target;
use recovering_bandits::Scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(scn) = Scenario::from_json_slice(data) {
        // Anything accepted must serialize and parse back.
        let json = scn.to_json().expect("serialize accepted scenario");
        let back = Scenario::from_json_str(&json).expect("reparse scenario");
        assert_eq!(back.to_json().unwrap(), json);
        for a in 0..scn.arms() {
            for s in 1..=scn.s_max() {
                assert!(scn.mean(a, s).is_finite());
            }
        }
    }
});
