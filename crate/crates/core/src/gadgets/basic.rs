//! Single-figure constructions and the building blocks of the counter.

use crate::error::{Error, Result};
use crate::model::SystemBuilder;
use crate::policy::NamedModel;
use crate::scalar::Scalar;

use super::{int, names, rates, Expectation, GadgetBlueprint, Net, OrderingResult, Params, SINK};

/// Three banks; `u` pays half of what it owes.
pub fn example1<S: Scalar>() -> GadgetBlueprint<S> {
    let mut b = SystemBuilder::new();
    b.bank("u", int(2)).bank("v", int(1)).bank("w", int(0));
    b.debt("u", "v", int(2)).debt("u", "w", int(2));
    b.cds("w", "v", "u", int(2));
    plain(
        "example1",
        b,
        &["u", "v", "w"],
        vec![Expectation::Equilibrium {
            rates: rates(&[("u", 1, 2)]),
        }],
    )
}

/// Three banks whose only equilibrium is `(1, 4/9, 2/3)`.
pub fn example2<S: Scalar>() -> GadgetBlueprint<S> {
    let mut b = SystemBuilder::new();
    b.bank("u", int(1)).bank("v", int(1)).bank("w", int(0));
    b.cds("u", "v", "w", int(1));
    b.debt("v", "w", int(3)).debt("w", "u", int(2));
    plain(
        "example2",
        b,
        &["u", "v", "w"],
        vec![Expectation::Equilibrium {
            rates: rates(&[("v", 4, 9), ("w", 2, 3)]),
        }],
    )
}

fn plain<S: Scalar>(
    kind: &str,
    builder: SystemBuilder<S>,
    roles: &[&str],
    contract: Vec<Expectation<S>>,
) -> GadgetBlueprint<S> {
    GadgetBlueprint {
        kind: kind.to_string(),
        params: Params::new(),
        system: builder.build().expect("static gadget is valid"),
        roles: roles
            .iter()
            .map(|r| (r.to_string(), r.to_string()))
            .collect(),
        contract,
        tight: false,
    }
}

/// `v`'s default funds `u`, which funds `v`: the naive process loops.
pub fn infinite_loop<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    n.role_bank("u", 0).role_bank("v", 0);
    n.debt("u", "v", 1).to_sink("v", 1).insure("u", "v", 1);
    n.expect(Expectation::Ordering {
        model: NamedModel::Reversible,
        ordering: vec![],
        result: OrderingResult::Cycles,
    })
    .expect(Expectation::Equilibrium {
        rates: rates(&[("u", 1, 2), ("v", 1, 2)]),
    })
    .expect(Expectation::Terminals {
        model: NamedModel::Reversible,
        roles: names(&["u", "v"]),
        rates: vec![],
    })
    .tight();
    n.finish("infinite_loop").expect("static gadget is valid")
}

fn branching_pair<S: Scalar>(n: &mut Net<S>, u: &str, v: &str) {
    n.insure(u, v, 1).insure(v, u, 1);
}

/// Two mutually insured debtors: exactly one of them ends in default.
pub fn branching<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    n.role_bank("u", 0).role_bank("v", 0);
    n.to_sink("u", 1).to_sink("v", 1);
    branching_pair(&mut n, "u", "v");
    n.expect(Expectation::Terminals {
        model: NamedModel::Reversible,
        roles: names(&["u", "v"]),
        rates: vec![vec![int(0), int(1)], vec![int(1), int(0)]],
    })
    .expect(Expectation::Equilibrium {
        rates: rates(&[("u", 1, 2), ("v", 1, 2)]),
    })
    .tight();
    n.finish("branching").expect("static gadget is valid")
}

/// A zero-one equilibrium that no ordering reaches.
pub fn unreachable<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    n.role_bank("u", 0).role_bank("v", 0).role_bank("w", 0);
    n.to_sink("u", 1).insure("u", "v", 1);
    n.cds_to_sink("v", "w", 1).cds_to_sink("w", "v", 1);
    n.expect(Expectation::Terminals {
        model: NamedModel::Reversible,
        roles: names(&["u", "v", "w"]),
        rates: vec![vec![int(0), int(1), int(1)]],
    })
    .expect(Expectation::Equilibrium {
        rates: rates(&[("v", 0, 1), ("w", 0, 1)]),
    })
    .tight();
    n.finish("unreachable").expect("static gadget is valid")
}

/// Bank that defaults on its own, used to shift run lengths by one.
pub const PAD: &str = "pad";

/// The loop of [`infinite_loop`] plus a bank `w` whose default ends it.
/// Reachable run lengths are the odd numbers; an even `k` adds one
/// independently defaulting bank ([`PAD`]).
pub fn stop_at_will<S: Scalar>(k: usize) -> Result<GadgetBlueprint<S>> {
    if k == 0 {
        return Err(Error::InvalidParams("stop_at_will needs k ≥ 1".into()));
    }
    let mut n = Net::new();
    n.role_bank("u", 0).role_bank("v", 0).role_bank("w", 0);
    n.debt("u", "v", 1).to_sink("v", 1).insure("u", "v", 1);
    n.to_sink("w", 1).insure("u", "w", 1).insure("v", "w", 1);
    if k.is_multiple_of(2) {
        n.role_bank(PAD, 0).to_sink(PAD, 1);
    }
    let ordering = stop_at_will_ordering(k);
    n.expect(Expectation::Ordering {
        model: NamedModel::Reversible,
        ordering,
        result: OrderingResult::Stabilizes {
            steps: k as u64,
            rates: rates(&[("u", 1, 1), ("v", 1, 1), ("w", 0, 1)]),
        },
    })
    .tight();
    n.finish("stop_at_will")
}

/// An ordering of [`stop_at_will`]`(k)` that stabilizes after exactly `k` steps.
pub fn stop_at_will_ordering(k: usize) -> Vec<String> {
    let odd = if k.is_multiple_of(2) { k - 1 } else { k };
    let mut out = Vec::with_capacity(k);
    let tail: &[&str] = if odd % 4 == 1 {
        &["w"]
    } else {
        &["u", "w", "u"]
    };
    for _ in 0..(odd - tail.len()) / 4 {
        out.extend(["u", "v", "u", "v"].map(String::from));
    }
    out.extend(tail.iter().map(|s| s.to_string()));
    if k.is_multiple_of(2) {
        out.push(PAD.to_string());
    }
    out
}

/// Branching pair in front of the loop: the first mover decides whether the
/// process stabilizes.
pub fn difftime<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    n.role_bank("u", 0)
        .role_bank("v", 0)
        .role_bank("w1", 0)
        .role_bank("w2", 0);
    branching_pair(&mut n, "w1", "w2");
    n.debt("w1", "u", 1).to_sink("w2", 1);
    n.debt("u", "v", 1).to_sink("v", 1).insure("u", "v", 1);
    n.expect(Expectation::Ordering {
        model: NamedModel::Reversible,
        ordering: names(&["w2"]),
        result: OrderingResult::Stabilizes {
            steps: 1,
            rates: rates(&[("w1", 1, 1), ("w2", 0, 1)]),
        },
    })
    .expect(Expectation::Ordering {
        model: NamedModel::Reversible,
        ordering: names(&["w1"]),
        result: OrderingResult::Cycles,
    })
    .tight();
    n.finish("difftime").expect("static gadget is valid")
}

/// Branching pair where one side feeds a chain of `n - 4` banks.
pub fn diffoutcome<S: Scalar>(size: usize) -> Result<GadgetBlueprint<S>> {
    if size < 5 {
        return Err(Error::InvalidParams("diffoutcome needs n ≥ 5".into()));
    }
    let chain: Vec<String> = (1..=size - 4).map(|i| format!("c{i}")).collect();
    let mut n = Net::new();
    n.role_bank("u", 0).role_bank("v", 0);
    branching_pair(&mut n, "u", "v");
    n.to_sink("u", 1);
    for c in &chain {
        n.role_bank(c, 0);
    }
    n.debt("v", &chain[0], 1);
    for pair in chain.windows(2) {
        n.debt(&pair[0], &pair[1], 1);
    }
    n.to_sink(chain.last().expect("non-empty chain"), 1);
    n.expect(Expectation::Described(format!(
        "u first: 1 default; v first: {} defaults",
        size - 3
    )))
    .tight();
    n.finish("diffoutcome")
}

fn literal_inputs<S: Scalar>(n: &mut Net<S>, count: usize) -> Result<Vec<String>> {
    if count == 0 {
        return Err(Error::InvalidParams(
            "a clause needs at least one literal".into(),
        ));
    }
    let ids: Vec<String> = (1..=count).map(|i| format!("l{i}")).collect();
    for id in &ids {
        n.role_bank(id, 0);
    }
    Ok(ids)
}

/// Clause node funded by a CDS on each literal bank; the literal banks are
/// free inputs without contracts of their own.
pub fn clause_best_standalone<S: Scalar>(literals: usize) -> Result<GadgetBlueprint<S>> {
    let mut n = Net::new();
    let ids = literal_inputs(&mut n, literals)?;
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    super::clause_best(&mut n, "clause", &refs);
    n.role("clause", "clause");
    n.expect(Expectation::Described(
        "clause stays solvent iff at least one literal bank defaults".into(),
    ));
    n.finish("clause_best")
}

/// Clause node owing a CDS on each literal bank; the literal banks are free
/// inputs without contracts of their own.
pub fn clause_worst_standalone<S: Scalar>(literals: usize) -> Result<GadgetBlueprint<S>> {
    let mut n = Net::new();
    let ids = literal_inputs(&mut n, literals)?;
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    super::clause_worst(&mut n, "clause", &refs);
    n.role("clause", "clause");
    n.expect(Expectation::Described(
        "clause defaults iff at least one literal bank defaults".into(),
    ));
    n.finish("clause_worst")
}

/// Whichever of `v1`, `v2` defaults first ends solvent.
pub fn earlydef_reversible<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    for id in ["v1", "v2", "u1", "u2", "w1", "w2"] {
        n.role_bank(id, 0);
    }
    n.to_sink("v1", 1).to_sink("v2", 1);
    branching_pair(&mut n, "v1", "v2");
    n.cds_to_sink("u2", "v1", 1).cds_to_sink("u1", "v2", 1);
    n.insure("u1", "u2", 1).insure("u2", "u1", 1);
    n.cds_to_sink("w2", "u2", 1).cds_to_sink("w1", "u1", 1);
    n.cds_to_sink("u2", "w2", 1).cds_to_sink("u1", "w1", 1);
    n.insure("v1", "w2", 1).insure("v2", "w1", 1);
    n.expect(Expectation::Ordering {
        model: NamedModel::Reversible,
        ordering: names(&["v1", "u2", "w2", "v1", "v2"]),
        result: OrderingResult::Stabilizes {
            steps: 5,
            rates: rates(&[("v1", 1, 1), ("v2", 0, 1)]),
        },
    })
    .expect(Expectation::Ordering {
        model: NamedModel::Reversible,
        ordering: names(&["v2", "u1", "w1", "v2", "v1"]),
        result: OrderingResult::Stabilizes {
            steps: 5,
            rates: rates(&[("v1", 0, 1), ("v2", 1, 1)]),
        },
    })
    .tight();
    n.finish("earlydef_reversible")
        .expect("static gadget is valid")
}

/// Naive updates halve `r_u` forever; smart updates stabilize at zero.
pub fn convergence<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    n.role_bank("u", 0).role_bank("v", 0).role_bank("w", 0);
    n.debt("u", "v", 1)
        .debt("u", "w", 1)
        .debt("v", "u", 1)
        .to_sink("w", 1);
    n.role("sink", SINK);
    n.expect(Expectation::Ordering {
        model: NamedModel::Smart,
        ordering: vec![],
        result: OrderingResult::Stabilizes {
            steps: 3,
            rates: rates(&[("u", 0, 1), ("v", 0, 1), ("w", 0, 1)]),
        },
    })
    .expect(Expectation::Equilibrium {
        rates: rates(&[("u", 0, 1), ("v", 0, 1), ("w", 0, 1)]),
    });
    n.finish("convergence").expect("static gadget is valid")
}

/// Smart updates of `u` converge to `1/4` without reaching it.
pub fn otherconv<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    n.role_bank("u", 0).role_bank("v", 2);
    n.to_sink("u", 2).debt("v", "u", 1).cds_to_sink("v", "u", 4);
    n.expect(Expectation::Equilibrium {
        rates: rates(&[("u", 1, 4), ("v", 1, 2)]),
    })
    .expect(Expectation::Described(
        "smart: repeated updates of u follow r ← 1/(5 − 4r) from 1/2".into(),
    ));
    n.finish("otherconv").expect("static gadget is valid")
}

/// Debt-only system in which the monotone process takes `m² + 2m` steps.
pub fn longstab<S: Scalar>(m: usize) -> Result<GadgetBlueprint<S>> {
    if m == 0 {
        return Err(Error::InvalidParams("longstab needs m ≥ 1".into()));
    }
    let mut n = Net::new();
    n.role_bank("v", 0);
    for i in 1..=m {
        let (w, u) = (format!("w{i}"), format!("u{i}"));
        n.role_bank(&w, 0).role_bank(&u, 0);
        n.debt(&w, "v", 1).debt("v", &u, 1).to_sink(&u, 1);
    }
    n.expect(Expectation::Ordering {
        model: NamedModel::Monotone,
        ordering: longstab_ordering(m),
        result: OrderingResult::Stabilizes {
            steps: (m * m + 2 * m) as u64,
            rates: rates(&[("v", 0, 1)]),
        },
    });
    n.finish("longstab")
}

/// Ordering of [`longstab`]: each `w_i`, then `v`, then every `u_j`.
pub fn longstab_ordering(m: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 1..=m {
        out.push(format!("w{i}"));
        out.push("v".to_string());
        out.extend((1..=m).map(|j| format!("u{j}")));
    }
    out
}

/// Under the monotone model `v1` does best by defaulting first.
pub fn earlydef_monotone<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    for id in ["v1", "v2", "u1", "u2"] {
        n.role_bank(id, 0);
    }
    n.role_bank("w", 3);
    n.to_sink("v1", 4).debt("w", "v1", 3).insure("v1", "v2", 1);
    n.to_sink("v2", 1).insure("v2", "v1", 4);
    n.cds_to_sink("u1", "v2", 1).cds_to_sink("u2", "v1", 1);
    n.cds_to_sink("w", "u1", 6);
    n.expect(Expectation::Ordering {
        model: NamedModel::Monotone,
        ordering: names(&["v1"]),
        result: OrderingResult::Stabilizes {
            steps: 2,
            rates: rates(&[("v1", 3, 4)]),
        },
    })
    .expect(Expectation::Ordering {
        model: NamedModel::Monotone,
        ordering: names(&["v2", "u1", "w", "v1"]),
        result: OrderingResult::Stabilizes {
            steps: 5,
            rates: rates(&[("v1", 1, 2), ("w", 1, 3)]),
        },
    })
    .tight();
    n.finish("earlydef_monotone")
        .expect("static gadget is valid")
}

/// Adds the two banks of a stable bit: each owes a CDS on the other.
pub(crate) fn stable_bit_into<S: Scalar>(n: &mut Net<S>, b1: &str, b2: &str) {
    n.bank(b1, 0).bank(b2, 0);
    n.cds_to_sink(b1, b2, 1).cds_to_sink(b2, b1, 1);
}

/// Wires a stable bit to a reset bank (its default returns the bit to one)
/// and a set bank (its default pushes the bit to zero).
pub(crate) fn bit_controls<S: Scalar>(
    n: &mut Net<S>,
    b1: &str,
    b2: &str,
    reset: Option<&str>,
    set: Option<&str>,
) {
    if let Some(z) = reset {
        n.insure(b1, z, 2).insure(b2, z, 1);
    }
    if let Some(z) = set {
        n.cds_to_sink(b1, z, 1);
    }
}

/// Two banks that stay in whichever zero-one state they are put in.
pub fn stable_bit<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    stable_bit_into(&mut n, "b1", "b2");
    n.role("b1", "b1").role("b2", "b2");
    n.expect(Expectation::Equilibrium { rates: vec![] })
        .expect(Expectation::Equilibrium {
            rates: rates(&[("b1", 0, 1), ("b2", 0, 1)]),
        })
        .tight();
    n.finish("stable_bit").expect("static gadget is valid")
}

/// Stable bit with a reset bank `z1` and a set bank `z2`, both free inputs.
pub fn resettable_stable_bit<S: Scalar>() -> GadgetBlueprint<S> {
    let mut n = Net::new();
    stable_bit_into(&mut n, "b1", "b2");
    n.role_bank("z1", 0).role_bank("z2", 0);
    bit_controls(&mut n, "b1", "b2", Some("z1"), Some("z2"));
    n.role("b1", "b1").role("b2", "b2");
    n.expect(Expectation::Equilibrium { rates: vec![] })
        .expect(Expectation::Equilibrium {
            rates: rates(&[("b1", 0, 1), ("b2", 0, 1)]),
        })
        .expect(Expectation::Described(
            "z2 at zero drives the bit to zero; z1 at zero drives it back to one".into(),
        ))
        .tight();
    n.finish("resettable_stable_bit")
        .expect("static gadget is valid")
}

/// Adds a condition gadget: `w` can move to zero only while every bank in
/// `zero` is at zero and every bank in `one` is at one. `u` is the bank
/// that checks the condition.
pub(crate) fn condition_into<S: Scalar>(
    n: &mut Net<S>,
    u: &str,
    w: &str,
    zero: &[&str],
    one: &[&str],
) {
    let c = zero.len() as i64;
    n.bank(u, 0).bank(w, 0);
    for z in zero {
        n.insure(u, z, 1);
    }
    for z in one {
        n.cds_to_sink(u, z, 1);
    }
    if c > 0 {
        n.to_sink(u, c);
    }
    n.to_sink(w, 1).insure(w, u, c + 1);
}

/// Condition gadget over free input banks `z1..` (must be zero) and
/// `y1..` (must be one).
pub fn condition_gadget<S: Scalar>(zero: usize, one: usize) -> Result<GadgetBlueprint<S>> {
    if zero + one == 0 {
        return Err(Error::InvalidParams(
            "condition gadget needs at least one input".into(),
        ));
    }
    let mut n = Net::new();
    let z: Vec<String> = (1..=zero).map(|i| format!("z{i}")).collect();
    let y: Vec<String> = (1..=one).map(|i| format!("y{i}")).collect();
    for id in z.iter().chain(&y) {
        n.role_bank(id, 0);
    }
    let zr: Vec<&str> = z.iter().map(String::as_str).collect();
    let yr: Vec<&str> = y.iter().map(String::as_str).collect();
    condition_into(&mut n, "u", "w", &zr, &yr);
    n.role("u", "u").role("w", "w");
    n.expect(Expectation::Described(
        "after u settles, w's target is zero exactly when all z are 0 and all y are 1".into(),
    ))
    .tight();
    n.finish("condition_gadget")
}
