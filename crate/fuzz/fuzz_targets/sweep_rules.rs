#![no_main]

use interference_packing::experiments::{DensityRule, EpsilonRule, SweepKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rule) = s.parse::<DensityRule>() {
        assert_eq!(rule.to_string().parse::<DensityRule>().unwrap(), rule);
        let _ = rule.density(20);
    }
    if let Ok(rule) = s.parse::<EpsilonRule>() {
        assert_eq!(rule.to_string().parse::<EpsilonRule>().unwrap(), rule);
        let _ = rule.epsilon(20);
    }
    let _ = s.parse::<SweepKind>();
});
