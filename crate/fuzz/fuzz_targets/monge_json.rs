#![no_main]
use libfuzzer_sys::fuzz_target;
use ovck::monge::MongeRhs;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = MongeRhs::from_json_str(text) {
        let json = serde_json::to_string(&f.to_json()).unwrap();
        MongeRhs::from_json_str(&json).expect("round trip");
    }
});
