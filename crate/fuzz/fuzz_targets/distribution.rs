#![no_main]

use invsample::BoundedDistribution;
use libfuzzer_sys::fuzz_target;

// Any accepted spec must print back to a string that parses to the same law
// with a mean inside [0, 1].
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(dist) = text.parse::<BoundedDistribution>() else {
        return;
    };
    let printed = dist.to_string();
    let again: BoundedDistribution = printed.parse().expect("printed spec parses");
    assert_eq!(dist, again, "{printed}");
    let mean = dist.mean();
    assert!((0.0..=1.0).contains(&mean) || (mean - 1.0).abs() < 1e-12, "{printed}: {mean}");
});
