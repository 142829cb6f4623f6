#![no_main]
use libfuzzer_sys::fuzz_target;
use ovck::series::{SeriesJson, TruncatedSeries};

fuzz_target!(|data: &[u8]| {
    let Ok(json) = serde_json::from_slice::<SeriesJson>(data) else { return };
    if let Ok(series) = TruncatedSeries::from_json(&json) {
        let back = TruncatedSeries::from_json(&series.to_json()).expect("round trip");
        assert_eq!(back, series);
    }
});
