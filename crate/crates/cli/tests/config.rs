use kinetic_cli::config::{ConfigError, Value};
use kinetic_cli::{parse_config, parse_with_overrides, Subcommand};
use proptest::prelude::*;

#[test]
fn documented_examples() {
    let v = parse_config(Subcommand::Validate, "").unwrap();
    assert_eq!((v.seed, v.seed_defaulted), (0, true));

    let h = parse_config(Subcommand::Hybrid, "delta=0.01\ngamma=1.0\nsteps=1000").unwrap();
    assert_eq!(h.real("gamma"), 1.0);
    assert_eq!(h.real("a"), 5.43);
    assert_eq!(h.string("split"), "pairwise");

    let e = parse_config(Subcommand::Hybrid, "delta=abc").unwrap_err();
    assert!(matches!(&e.0[..], [ConfigError::TypeMismatch { key, .. }] if key == "delta"));
    assert_eq!(e.0[0].line(), Some(1));
}

#[test]
fn keys_belong_to_their_subcommand() {
    assert!(parse_config(Subcommand::Validate, "delta = 1").is_err());
    assert!(parse_config(Subcommand::Escape, "H = quadratic").is_err());
    assert!(parse_config(Subcommand::Scaling, "H = quadratic").is_ok());
}

#[test]
fn command_line_errors_are_not_attributed_to_lines() {
    let over = vec![("steps".to_owned(), "many".to_owned())];
    let e = parse_with_overrides(Subcommand::Zzd, "", &over).unwrap_err();
    assert_eq!(e.0[0].line(), None);
    assert!(e.to_string().contains("command line"));
}

#[test]
fn lists_and_booleans() {
    let c = parse_config(Subcommand::Escape, "eps = 1, 0.5 ,0.25,0.125").unwrap();
    assert_eq!(c.reals("eps"), &[1.0, 0.5, 0.25, 0.125]);
    assert!(parse_config(Subcommand::Escape, "eps = 1,,2").is_err());
    assert!(parse_config(Subcommand::Escape, "eps = nan").is_err());
    let z = parse_config(Subcommand::Zzd, "factorized = yes").unwrap();
    assert!(z.flag("factorized"));
    assert!(parse_config(Subcommand::Zzd, "factorized = maybe").is_err());
}

proptest! {
    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        for sub in Subcommand::ALL {
            let _ = parse_config(sub, &text);
        }
    }

    #[test]
    fn written_values_parse_back(delta in 1e-6f64..1.0, steps in 0u64..1_000_000, seed in any::<u64>()) {
        let text = format!("delta = {delta:?}\nsteps = {steps}\nseed = {seed}\n");
        let c = parse_config(Subcommand::Hybrid, &text).unwrap();
        prop_assert_eq!(c.real("delta"), delta);
        prop_assert_eq!(c.uint("steps"), steps);
        prop_assert_eq!(c.seed, seed);
        prop_assert!(!c.seed_defaulted);
        prop_assert_eq!(c.values.get("steps"), Some(&Value::UInt(steps)));
    }

    #[test]
    fn hash_depends_only_on_values(seed in any::<u64>(), pad in " {0,3}", comment in "[a-z ]{0,10}") {
        let plain = parse_config(Subcommand::Zzd, &format!("seed={seed}")).unwrap();
        let noisy = parse_config(Subcommand::Zzd, &format!("#{comment}\n{pad}seed{pad}={pad}{seed}{pad}#{comment}\n")).unwrap();
        prop_assert_eq!(plain.hash(), noisy.hash());
    }
}
