#![no_main]
use libfuzzer_sys::fuzz_target;
use ovck::system::SystemSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sys) = SystemSpec::from_json_str(text) {
        // re-serialization of an accepted system must decode again
        let json = serde_json::to_string(&sys.to_json()).unwrap();
        SystemSpec::from_json_str(&json).expect("round trip");
    }
});
