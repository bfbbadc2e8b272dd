#![no_main]

use interference_packing::experiments::{parse_csv, write_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(rows) = parse_csv(text) else {
        return;
    };
    if rows.is_empty() {
        return;
    }
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).expect("parsed rows serialize");
    let again = parse_csv(std::str::from_utf8(&buf).unwrap()).expect("re-parse of written csv");
    assert_eq!(again.len(), rows.len());
});
