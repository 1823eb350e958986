#![no_main]

use bar_core::coupling::cache;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = cache::decode(data) {
        assert_eq!(cache::encode(&t), data);
    }
    let _ = cache::decode_key(data);
});
