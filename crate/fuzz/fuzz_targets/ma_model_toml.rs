#![no_main]
use libfuzzer_sys::fuzz_target;
use rvfield::MaModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = MaModel::from_toml(text) {
        let again = MaModel::from_toml(&m.to_toml()).expect("printed model parses");
        assert_eq!(again, m);
        let _ = m.extremal_objects();
    }
});
