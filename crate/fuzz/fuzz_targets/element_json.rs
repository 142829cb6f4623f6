#![no_main]
use libfuzzer_sys::fuzz_target;
use ovck::eds::ElementJson;

fuzz_target!(|data: &[u8]| {
    // first two bytes pick the ambient dimensions
    if data.len() < 2 {
        return;
    }
    let n = 1 + (data[0] % 4) as usize;
    let m = 1 + (data[1] % 3) as usize;
    let Ok(json) = serde_json::from_slice::<ElementJson>(&data[2..]) else { return };
    let _ = json.decode(n, m);
});
