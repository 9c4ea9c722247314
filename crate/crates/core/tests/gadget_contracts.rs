use seqclear_core::gadgets::{build, Params, GADGET_KINDS};
use seqclear_core::{ExploreConfig, Rational};

fn params(kind: &str) -> Params {
    let pairs: &[(&str, &str)] = match kind {
        "stop_at_will" => &[("k", "6")],
        "diffoutcome" => &[("n", "7")],
        "longstab" => &[("m", "3")],
        "counter" => &[("k", "2")],
        "maxsat_min" | "maxsat_max" | "best_time" => &[("formula", "1 2; -1; -2")],
        _ => &[],
    };
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn every_catalog_entry_meets_its_contract() {
    for kind in GADGET_KINDS {
        let bp = build::<Rational>(kind, &params(kind)).unwrap_or_else(|e| panic!("{kind}: {e}"));
        assert_eq!(bp.kind, *kind);
        for id in bp.roles.values() {
            bp.system.index_of(id).unwrap();
        }
        for expectation in &bp.contract {
            let ok = bp.check(expectation, ExploreConfig::default()).unwrap();
            assert!(ok, "{kind}: {expectation:?}");
        }
    }
}

#[test]
fn bad_parameters_are_rejected() {
    let p = |pairs: &[(&str, &str)]| -> Params {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    };
    assert!(build::<Rational>("stop_at_will", &p(&[])).is_err());
    assert!(build::<Rational>("stop_at_will", &p(&[("k", "0")])).is_err());
    assert!(build::<Rational>("diffoutcome", &p(&[("n", "-3")])).is_err());
    assert!(build::<Rational>("longstab", &p(&[("m", "x")])).is_err());
    assert!(build::<Rational>("no_such_gadget", &p(&[])).is_err());
}
