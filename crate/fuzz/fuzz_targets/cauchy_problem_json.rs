#![no_main]
use libfuzzer_sys::fuzz_target;
use ovck::cauchy::CauchyProblemJson;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = serde_json::from_slice::<CauchyProblemJson>(data) else { return };
    let _ = json.data_series();
    let _ = json.slope_matrix();
});
