#![no_main]
use libfuzzer_sys::fuzz_target;
use rvfield_cli::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = Config::parse(text) {
        Config::parse(&c.to_toml()).expect("printed config parses");
    }
});
