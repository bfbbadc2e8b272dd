#![no_main]

use interference_packing::network::parse_instance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = parse_instance(text) else {
        return;
    };
    // Writing and re-reading must reproduce every coordinate exactly.
    let again = parse_instance(&file.to_text()).expect("re-parse of written instance");
    assert_eq!(again, file);
    if file.positions.len() <= 64 {
        let _ = file.instance();
    }
});
