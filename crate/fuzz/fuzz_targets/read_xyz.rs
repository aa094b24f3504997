#![no_main]

use kinetic::potentials::{parse_xyz, read_xyz};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = parse_xyz(data) {
        assert!(cfg.positions.iter().all(|p| (0.0..cfg.box_side).contains(p)));
        let again = read_xyz(&cfg.to_text()).expect("written configuration reads back");
        assert_eq!(again, cfg);
    }
});
