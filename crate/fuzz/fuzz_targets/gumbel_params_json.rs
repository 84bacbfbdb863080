#![no_main]
use libfuzzer_sys::fuzz_target;
use rvfield::alignment::GumbelParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = GumbelParams::from_json(text) {
        for score in [0.0, 10.0, 1e3] {
            let v = p.pvalue(score, 1000);
            assert!(v.is_nan() || (0.0..=1.0).contains(&v));
        }
    }
});
