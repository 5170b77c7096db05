#![no_main]

use invsample::{Estimator, TailSide};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(est) = text.parse::<Estimator>() {
        assert_eq!(est.to_string().parse::<Estimator>().unwrap(), est);
        assert!(text.eq_ignore_ascii_case(&est.to_string()));
    }
    if let Ok(side) = text.parse::<TailSide>() {
        assert_eq!(side.to_string().parse::<TailSide>().unwrap(), side);
    }
});
