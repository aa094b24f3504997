#![no_main]

use kinetic::potentials::{parse_potential_spec, Domain};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_potential_spec(text) {
        assert_eq!(parse_potential_spec(&spec.to_string()).unwrap(), spec);
        if let Ok(u) = spec.discrete(2, Domain::Torus(6)) {
            let _ = u.value(&[1, -2]);
        }
    }
});
