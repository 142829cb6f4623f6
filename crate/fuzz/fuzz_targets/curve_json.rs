#![no_main]
use libfuzzer_sys::fuzz_target;
use ovck::geometry::CurveJson;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = serde_json::from_slice::<CurveJson>(data) else { return };
    let _ = json.decode();
});
