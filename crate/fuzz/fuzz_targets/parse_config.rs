#![no_main]

use libfuzzer_sys::fuzz_target;
use recovering_bandits::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = ExperimentConfig::from_json_slice(data) {
        let json = cfg.to_json().expect("serialize accepted config");
        ExperimentConfig::from_json_str(&json).expect("reparse config");
        // Resolving may fail (unsupported shape), but must not panic.
        let _ = cfg.resolve_scenario();
    }
});
