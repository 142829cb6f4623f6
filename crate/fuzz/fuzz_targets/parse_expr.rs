#![no_main]
use libfuzzer_sys::fuzz_target;
use ovck::expr::{parse, ParseContext};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for ctx in [
        ParseContext::system(3, 2, 2),
        ParseContext::system(1, 0, 0),
        ParseContext::monge(3),
    ] {
        if let Ok(expr) = parse(text, &ctx) {
            // the canonical printer must round-trip
            let printed = expr.print();
            let back = parse(&printed, &ctx).expect("reparse of printed form");
            assert_eq!(back, expr);
        }
    }
});
