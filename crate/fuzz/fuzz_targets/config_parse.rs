#![no_main]

use bar_core::frontend::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::parse(text) {
            let _ = cfg.check();
            RunConfig::parse(&cfg.to_text()).expect("echo reparses");
        }
    }
});
