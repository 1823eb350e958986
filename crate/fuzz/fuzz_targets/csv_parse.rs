#![no_main]

use bar_core::frontend::CsvDoc;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = CsvDoc::parse(text);
    }
});
