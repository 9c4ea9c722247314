//! MAXSAT reductions: variable gadgets are branching pairs, clause gadgets
//! reference the literal banks.

use crate::scalar::Scalar;

use super::{CnfFormula, Expectation, GadgetBlueprint, Net};

/// Bank id of a literal: `x{i}` defaults when `x_i` is true, `nx{i}` when
/// it is false.
pub fn literal_bank(lit: i64) -> String {
    if lit > 0 {
        format!("x{lit}")
    } else {
        format!("nx{}", -lit)
    }
}

/// Clause bank that owes one unit and is insured on each literal bank, so it
/// stays solvent iff some literal bank defaults.
pub fn clause_best<S: Scalar>(n: &mut Net<S>, clause: &str, literals: &[&str]) {
    n.bank(clause, 0).to_sink(clause, 1);
    for lit in literals {
        n.insure(clause, lit, 1);
    }
}

/// Clause bank without assets that owes a CDS on each literal bank, so it
/// defaults iff some literal bank defaults.
pub fn clause_worst<S: Scalar>(n: &mut Net<S>, clause: &str, literals: &[&str]) {
    n.bank(clause, 0);
    for lit in literals {
        n.cds_to_sink(clause, lit, 1);
    }
}

pub(crate) fn variable_gadgets<S: Scalar>(n: &mut Net<S>, k: usize) {
    for i in 1..=k as i64 {
        let (x, nx) = (literal_bank(i), literal_bank(-i));
        n.role_bank(&x, 0).role_bank(&nx, 0);
        n.to_sink(&x, 1).to_sink(&nx, 1);
        n.insure(&x, &nx, 1).insure(&nx, &x, 1);
    }
}

fn reduction<S: Scalar>(
    formula: &CnfFormula,
    kind: &str,
    clause: fn(&mut Net<S>, &str, &[&str]),
    claim: String,
) -> GadgetBlueprint<S> {
    let mut n = Net::new();
    variable_gadgets(&mut n, formula.variables());
    for (j, lits) in formula.clauses().iter().enumerate() {
        let id = format!("c{}", j + 1);
        let banks: Vec<String> = lits.iter().map(|&l| literal_bank(l)).collect();
        let refs: Vec<&str> = banks.iter().map(String::as_str).collect();
        clause(&mut n, &id, &refs);
        n.role(&id, &id);
    }
    n.expect(Expectation::Described(claim)).tight();
    n.finish(kind)
        .expect("reduction of a valid formula is valid")
}

/// Minimum number of defaults is `k + m - OPT`.
pub fn build_maxsat_min<S: Scalar>(formula: &CnfFormula) -> GadgetBlueprint<S> {
    reduction(
        formula,
        "maxsat_min",
        clause_best,
        "min defaults = variables + clauses - maxsat optimum".into(),
    )
}

/// Maximum number of defaults is `k + OPT`.
pub fn build_maxsat_max<S: Scalar>(formula: &CnfFormula) -> GadgetBlueprint<S> {
    reduction(
        formula,
        "maxsat_max",
        clause_worst,
        "max defaults = variables + maxsat optimum".into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{max_defaults, maxsat_opt, min_defaults, ExploreConfig};
    use crate::{Policy, Rational as Q};

    #[test]
    fn small_identities() {
        let cfg = ExploreConfig::default();
        for (text, k) in [("1", 1), ("1; -1", 1), ("1 2; -1", 2), ("", 2)] {
            let f = CnfFormula::parse_compact(text, Some(k)).unwrap();
            let (k, m, opt) = (f.variables(), f.clauses().len(), maxsat_opt(&f));
            for policy in [Policy::REVERSIBLE, Policy::MONOTONE] {
                let lo = min_defaults(&build_maxsat_min::<Q>(&f).system, policy, cfg).unwrap();
                let hi = max_defaults(&build_maxsat_max::<Q>(&f).system, policy, cfg).unwrap();
                assert_eq!(lo.defaults, k + m - opt, "{text} {policy}");
                assert_eq!(hi.defaults, k + opt, "{text} {policy}");
            }
        }
    }

    #[test]
    fn literal_naming() {
        assert_eq!(literal_bank(3), "x3");
        assert_eq!(literal_bank(-2), "nx2");
    }
}
