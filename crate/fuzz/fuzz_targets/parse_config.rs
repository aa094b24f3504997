#![no_main]

use kinetic_cli::{parse_config, Subcommand};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let sub = Subcommand::ALL[selector as usize % Subcommand::ALL.len()];
    match parse_config(sub, text) {
        Ok(cfg) => {
            // Canonical text must parse back to the same configuration.
            let body: String = cfg.canonical().lines().skip(1).map(|l| format!("{l}\n")).collect();
            let again = parse_config(sub, &body).expect("canonical text parses");
            assert_eq!(again.hash(), cfg.hash());
        }
        Err(errors) => assert!(!errors.0.is_empty()),
    }
});
