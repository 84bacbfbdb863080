//! Score-model loader plus validation and the root solve on whatever loads.
#![no_main]
use libfuzzer_sys::fuzz_target;
use rvfield::alignment::{lundberg_solve, validate_model, ScoreModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = ScoreModel::from_toml(text) else {
        return;
    };
    if validate_model(&m).is_ok() {
        if let Ok(t) = lundberg_solve(&m, 1e-10) {
            assert!(t > 0.0 && t.is_finite());
        }
    }
});
