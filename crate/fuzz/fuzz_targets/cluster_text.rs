//! Cluster-shape text parser: never panics, and accepted input survives a
//! print/parse round trip.
#![no_main]
use libfuzzer_sys::fuzz_target;
use rvfield::ClusterShape;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(shape) = ClusterShape::from_text(text) {
        let again = ClusterShape::from_text(&shape.to_text()).expect("printed shape parses");
        assert_eq!(again, shape);
    }
});
