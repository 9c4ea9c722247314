//! Static model of a financial system: banks, simple debts and credit default
//! swaps, and the pure evaluation of liabilities, payments and assets under a
//! recovery rate vector.
//!
//! A CDS of weight `δ` from `u` to `v` in reference to `w` obliges `u` to pay
//! `δ·(1 − r_w)` to `v`. Debtors pay every creditor the same fraction `r_u` of
//! what they owe, and a bank's recovery rate is consistent when it equals
//! `R(a, l)`: one if assets cover liabilities, `a / l` otherwise.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bank<S> {
    pub id: String,
    pub external_assets: S,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DebtContract<S> {
    pub debtor: usize,
    pub creditor: usize,
    pub weight: S,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CdsContract<S> {
    pub debtor: usize,
    pub creditor: usize,
    pub reference: usize,
    pub weight: S,
}

/// A validated system. Banks are addressed by dense indices internally; the
/// string ids are kept for input and output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinancialSystem<S> {
    banks: Vec<Bank<S>>,
    debts: Vec<DebtContract<S>>,
    cdss: Vec<CdsContract<S>>,
    index: HashMap<String, usize>,
}

/// Collects banks and contracts by id, merging parallel contracts, and
/// validates everything in [`SystemBuilder::build`].
#[derive(Debug, Clone)]
pub struct SystemBuilder<S> {
    banks: Vec<Bank<S>>,
    debts: Vec<(String, String, S)>,
    cdss: Vec<(String, String, String, S)>,
}

impl<S: Scalar> Default for SystemBuilder<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> SystemBuilder<S> {
    pub fn new() -> Self {
        SystemBuilder {
            banks: Vec::new(),
            debts: Vec::new(),
            cdss: Vec::new(),
        }
    }

    pub fn bank(&mut self, id: impl Into<String>, external_assets: S) -> &mut Self {
        self.banks.push(Bank {
            id: id.into(),
            external_assets,
        });
        self
    }

    pub fn debt(
        &mut self,
        debtor: impl Into<String>,
        creditor: impl Into<String>,
        weight: S,
    ) -> &mut Self {
        self.debts.push((debtor.into(), creditor.into(), weight));
        self
    }

    pub fn cds(
        &mut self,
        debtor: impl Into<String>,
        creditor: impl Into<String>,
        reference: impl Into<String>,
        weight: S,
    ) -> &mut Self {
        self.cdss
            .push((debtor.into(), creditor.into(), reference.into(), weight));
        self
    }

    pub fn has_bank(&self, id: &str) -> bool {
        self.banks.iter().any(|b| b.id == id)
    }

    pub fn set_external_assets(&mut self, id: &str, value: S) -> Result<()> {
        let bank = self
            .banks
            .iter_mut()
            .find(|b| b.id == id)
            .ok_or_else(|| Error::UnknownBank(id.to_string()))?;
        bank.external_assets = value;
        Ok(())
    }

    /// Sum of weights of every contract `id` owes, as currently recorded.
    pub fn outgoing_weight(&self, id: &str) -> S {
        let debts = self.debts.iter().filter(|d| d.0 == id).map(|d| d.2.clone());
        let cdss = self.cdss.iter().filter(|c| c.0 == id).map(|c| c.3.clone());
        debts.chain(cdss).fold(S::zero(), |acc, w| acc + w)
    }

    pub fn build(&self) -> Result<FinancialSystem<S>> {
        let mut index = HashMap::new();
        for (i, bank) in self.banks.iter().enumerate() {
            if bank.id.is_empty() {
                return Err(Error::EmptyBankId);
            }
            if bank.external_assets.is_negative() {
                return Err(Error::NegativeAssets(bank.id.clone()));
            }
            if index.insert(bank.id.clone(), i).is_some() {
                return Err(Error::DuplicateBank(bank.id.clone()));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownBank(id.to_string()))
        };

        let mut debts: BTreeMap<(usize, usize), S> = BTreeMap::new();
        for (d, c, w) in &self.debts {
            let (di, ci) = (lookup(d)?, lookup(c)?);
            if di == ci {
                return Err(Error::SelfContract(d.clone()));
            }
            if !w.is_positive() {
                return Err(Error::NonPositiveWeight(w.render()));
            }
            let entry = debts.entry((di, ci)).or_insert_with(S::zero);
            *entry = entry.clone() + w.clone();
        }

        let mut cdss: BTreeMap<(usize, usize, usize), S> = BTreeMap::new();
        for (d, c, r, w) in &self.cdss {
            let (di, ci, ri) = (lookup(d)?, lookup(c)?, lookup(r)?);
            if di == ci {
                return Err(Error::SelfContract(d.clone()));
            }
            if ri == di || ri == ci {
                return Err(Error::SelfReference {
                    debtor: d.clone(),
                    creditor: c.clone(),
                });
            }
            if !w.is_positive() {
                return Err(Error::NonPositiveWeight(w.render()));
            }
            let entry = cdss.entry((di, ci, ri)).or_insert_with(S::zero);
            *entry = entry.clone() + w.clone();
        }

        Ok(FinancialSystem {
            banks: self.banks.clone(),
            debts: debts
                .into_iter()
                .map(|((debtor, creditor), weight)| DebtContract {
                    debtor,
                    creditor,
                    weight,
                })
                .collect(),
            cdss: cdss
                .into_iter()
                .map(|((debtor, creditor, reference), weight)| CdsContract {
                    debtor,
                    creditor,
                    reference,
                    weight,
                })
                .collect(),
            index,
        })
    }
}

impl<S: Scalar> FinancialSystem<S> {
    pub fn empty() -> Self {
        FinancialSystem {
            banks: Vec::new(),
            debts: Vec::new(),
            cdss: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.banks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks.is_empty()
    }

    pub fn banks(&self) -> &[Bank<S>] {
        &self.banks
    }

    pub fn debts(&self) -> &[DebtContract<S>] {
        &self.debts
    }

    pub fn cdss(&self) -> &[CdsContract<S>] {
        &self.cdss
    }

    pub fn is_debt_only(&self) -> bool {
        self.cdss.is_empty()
    }

    pub fn id(&self, bank: usize) -> &str {
        &self.banks[bank].id
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownBank(id.to_string()))
    }

    pub fn external_assets(&self, bank: usize) -> &S {
        &self.banks[bank].external_assets
    }

    /// Rebuilds the system from its own data, to extend or modify it.
    pub fn to_builder(&self) -> SystemBuilder<S> {
        let mut b = SystemBuilder::new();
        for bank in &self.banks {
            b.bank(bank.id.clone(), bank.external_assets.clone());
        }
        for d in &self.debts {
            b.debt(self.id(d.debtor), self.id(d.creditor), d.weight.clone());
        }
        for c in &self.cdss {
            b.cds(
                self.id(c.debtor),
                self.id(c.creditor),
                self.id(c.reference),
                c.weight.clone(),
            );
        }
        b
    }

    /// Current obligation on a CDS: `δ·(1 − r_ref)`.
    pub fn cds_obligation(&self, cds: usize, rates: &RecoveryVector<S>) -> S {
        let c = &self.cdss[cds];
        c.weight.clone() * (S::one() - rates.get(c.reference).clone())
    }

    /// `l_{u,v}(r)` by index.
    pub fn pairwise_liability_at(&self, rates: &RecoveryVector<S>, u: usize, v: usize) -> S {
        let debt = self
            .debts
            .iter()
            .filter(|d| d.debtor == u && d.creditor == v)
            .fold(S::zero(), |acc, d| acc + d.weight.clone());
        self.cdss
            .iter()
            .enumerate()
            .filter(|(_, c)| c.debtor == u && c.creditor == v)
            .fold(debt, |acc, (i, _)| acc + self.cds_obligation(i, rates))
    }

    pub fn pairwise_liability(&self, rates: &RecoveryVector<S>, u: &str, v: &str) -> Result<S> {
        let (u, v) = (self.index_of(u)?, self.index_of(v)?);
        self.check_rates(rates)?;
        Ok(self.pairwise_liability_at(rates, u, v))
    }

    /// Assets and total liabilities of every bank; `frozen` overrides the
    /// obligation of individual CDSs (by CDS index) with a fixed weight.
    pub fn balances(
        &self,
        rates: &RecoveryVector<S>,
        frozen: Option<&BTreeMap<usize, S>>,
    ) -> (Vec<S>, Vec<S>) {
        let n = self.banks.len();
        let mut assets: Vec<S> = self
            .banks
            .iter()
            .map(|b| b.external_assets.clone())
            .collect();
        let mut liabilities = vec![S::zero(); n];
        for d in &self.debts {
            liabilities[d.debtor] = liabilities[d.debtor].clone() + d.weight.clone();
            let paid = rates.get(d.debtor).clone() * d.weight.clone();
            assets[d.creditor] = assets[d.creditor].clone() + paid;
        }
        for (i, c) in self.cdss.iter().enumerate() {
            let owed = match frozen.and_then(|f| f.get(&i)) {
                Some(w) => w.clone(),
                None => self.cds_obligation(i, rates),
            };
            if owed.is_zero() {
                continue;
            }
            liabilities[c.debtor] = liabilities[c.debtor].clone() + owed.clone();
            let paid = rates.get(c.debtor).clone() * owed;
            assets[c.creditor] = assets[c.creditor].clone() + paid;
        }
        (assets, liabilities)
    }

    pub fn evaluate(&self, rates: &RecoveryVector<S>) -> Result<Evaluation<S>> {
        self.check_rates(rates)?;
        let mut pairwise: BTreeMap<(usize, usize), S> = BTreeMap::new();
        for d in &self.debts {
            let e = pairwise
                .entry((d.debtor, d.creditor))
                .or_insert_with(S::zero);
            *e = e.clone() + d.weight.clone();
        }
        for (i, c) in self.cdss.iter().enumerate() {
            let e = pairwise
                .entry((c.debtor, c.creditor))
                .or_insert_with(S::zero);
            *e = e.clone() + self.cds_obligation(i, rates);
        }
        let (assets, total_liability) = self.balances(rates, None);
        let payments = pairwise
            .iter()
            .map(|(&(u, v), l)| ((u, v), rates.get(u).clone() * l.clone()))
            .collect();
        let equity = assets
            .iter()
            .zip(&total_liability)
            .enumerate()
            .map(|(v, (a, l))| {
                if rates.get(v).is_one() {
                    a.clone() - l.clone()
                } else {
                    S::zero()
                }
            })
            .collect();
        Ok(Evaluation {
            pairwise_liabilities: pairwise,
            total_liability,
            payments,
            assets,
            equity,
        })
    }

    pub fn check_rates(&self, rates: &RecoveryVector<S>) -> Result<()> {
        if rates.len() != self.banks.len() {
            return Err(Error::RateCount {
                expected: self.banks.len(),
                got: rates.len(),
            });
        }
        Ok(())
    }

    /// Per-bank residual `r_v − R(a_v(r), l_v(r))`; all zero exactly at an
    /// equilibrium.
    pub fn equilibrium_residuals(&self, rates: &RecoveryVector<S>) -> Result<Vec<S>> {
        self.check_rates(rates)?;
        let (assets, liabilities) = self.balances(rates, None);
        Ok(assets
            .into_iter()
            .zip(liabilities)
            .enumerate()
            .map(|(v, (a, l))| rates.get(v).clone() - recovery(&a, &l))
            .collect())
    }

    pub fn is_equilibrium(&self, rates: &RecoveryVector<S>) -> Result<EquilibriumCheck<S>> {
        let residuals = self.equilibrium_residuals(rates)?;
        Ok(EquilibriumCheck {
            holds: residuals.iter().all(|r| r.is_zero()),
            residuals,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumCheck<S> {
    pub holds: bool,
    pub residuals: Vec<S>,
}

/// `R(a, l)`; inputs must be non-negative.
pub fn recovery_function<S: Scalar>(assets: &S, liabilities: &S) -> Result<S> {
    if assets.is_negative() || liabilities.is_negative() {
        return Err(Error::NegativeInput);
    }
    Ok(recovery(assets, liabilities))
}

pub(crate) fn recovery<S: Scalar>(assets: &S, liabilities: &S) -> S {
    if assets >= liabilities {
        S::one()
    } else {
        assets.clone() / liabilities.clone()
    }
}

/// Announced recovery rates, index-aligned with the banks of a system.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecoveryVector<S> {
    rates: Vec<S>,
}

impl<S: Scalar> RecoveryVector<S> {
    pub fn ones(n: usize) -> Self {
        RecoveryVector {
            rates: vec![S::one(); n],
        }
    }

    pub fn from_vec(rates: Vec<S>) -> Result<Self> {
        if let Some((i, r)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !r.is_unit_interval())
        {
            return Err(Error::RateOutOfRange {
                bank: format!("#{i}"),
                rate: r.render(),
            });
        }
        Ok(RecoveryVector { rates })
    }

    /// All ones except the listed banks.
    pub fn with_rates(system: &FinancialSystem<S>, rates: &[(&str, S)]) -> Result<Self> {
        let mut v = Self::ones(system.len());
        for (id, r) in rates {
            let i = system.index_of(id)?;
            if !r.is_unit_interval() {
                return Err(Error::RateOutOfRange {
                    bank: id.to_string(),
                    rate: r.render(),
                });
            }
            v.rates[i] = r.clone();
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn get(&self, bank: usize) -> &S {
        &self.rates[bank]
    }

    pub fn set(&mut self, bank: usize, rate: S) {
        debug_assert!(rate.is_unit_interval());
        self.rates[bank] = rate;
    }

    pub fn as_slice(&self) -> &[S] {
        &self.rates
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.rates.iter()
    }

    pub fn by_id(&self, system: &FinancialSystem<S>, id: &str) -> Result<&S> {
        Ok(self.get(system.index_of(id)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation<S> {
    pub pairwise_liabilities: BTreeMap<(usize, usize), S>,
    pub total_liability: Vec<S>,
    pub payments: BTreeMap<(usize, usize), S>,
    pub assets: Vec<S>,
    /// `a_v − l_v` for solvent banks; zero for banks in default.
    pub equity: Vec<S>,
}

impl<S: Scalar> Evaluation<S> {
    pub fn payment(&self, u: usize, v: usize) -> S {
        self.payments.get(&(u, v)).cloned().unwrap_or_else(S::zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational as Q;
    use num_traits::{One, Signed, Zero};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Q {
        Q::from_frac(n, d)
    }

    fn fig1() -> FinancialSystem<Q> {
        let mut b = SystemBuilder::new();
        b.bank("u", q(2, 1)).bank("v", q(1, 1)).bank("w", q(0, 1));
        b.debt("u", "v", q(2, 1)).debt("u", "w", q(2, 1));
        b.cds("w", "v", "u", q(2, 1));
        b.build().unwrap()
    }

    fn fig2() -> FinancialSystem<Q> {
        let mut b = SystemBuilder::new();
        b.bank("u", q(1, 1)).bank("v", q(1, 1)).bank("w", q(0, 1));
        b.cds("u", "v", "w", q(1, 1));
        b.debt("v", "w", q(3, 1));
        b.debt("w", "u", q(2, 1));
        b.build().unwrap()
    }

    #[test]
    fn cds_liability_tracks_reference_rate() {
        let s = fig1();
        let r = RecoveryVector::with_rates(&s, &[("u", q(1, 2))]).unwrap();
        assert_eq!(s.pairwise_liability(&r, "w", "v").unwrap(), q(1, 1));
        assert_eq!(s.pairwise_liability(&r, "v", "u").unwrap(), q(0, 1));
        assert_eq!(
            s.pairwise_liability(&r, "x", "u"),
            Err(Error::UnknownBank("x".into()))
        );
    }

    #[test]
    fn fig2_hand_substitution() {
        let s = fig2();
        let r = RecoveryVector::with_rates(&s, &[("v", q(4, 9)), ("w", q(2, 3))]).unwrap();
        let e = s.evaluate(&r).unwrap();
        let (v, w) = (s.index_of("v").unwrap(), s.index_of("w").unwrap());
        assert_eq!(e.assets[v], q(4, 3));
        assert_eq!(e.total_liability[v], q(3, 1));
        assert_eq!(e.assets[w], q(4, 3));
        assert_eq!(e.total_liability[w], q(2, 1));
        assert!(s.is_equilibrium(&r).unwrap().holds);
    }

    #[test]
    fn recovery_function_branches() {
        assert_eq!(recovery_function(&q(2, 1), &q(4, 1)).unwrap(), q(1, 2));
        assert_eq!(recovery_function(&q(5, 1), &q(3, 1)).unwrap(), q(1, 1));
        assert_eq!(recovery_function(&q(0, 1), &q(0, 1)).unwrap(), q(1, 1));
        assert_eq!(
            recovery_function(&q(-1, 1), &q(0, 1)),
            Err(Error::NegativeInput)
        );
    }

    #[test]
    fn empty_system_evaluates_to_empty_maps() {
        let s = FinancialSystem::<Q>::empty();
        let e = s.evaluate(&RecoveryVector::ones(0)).unwrap();
        assert!(e.pairwise_liabilities.is_empty() && e.assets.is_empty());
    }

    #[test]
    fn builder_rejects_invalid_contracts() {
        let mut b = SystemBuilder::<Q>::new();
        b.bank("a", q(0, 1)).bank("b", q(0, 1));
        let mut self_ref = b.clone();
        self_ref.cds("a", "b", "a", q(1, 1));
        assert!(matches!(self_ref.build(), Err(Error::SelfReference { .. })));
        let mut self_debt = b.clone();
        self_debt.debt("a", "a", q(1, 1));
        assert_eq!(self_debt.build(), Err(Error::SelfContract("a".into())));
        let mut zero = b.clone();
        zero.debt("a", "b", q(0, 1));
        assert!(matches!(zero.build(), Err(Error::NonPositiveWeight(_))));
        let mut dup = b.clone();
        dup.bank("a", q(1, 1));
        assert_eq!(dup.build(), Err(Error::DuplicateBank("a".into())));
        let mut missing = b.clone();
        missing.debt("a", "c", q(1, 1));
        assert_eq!(missing.build(), Err(Error::UnknownBank("c".into())));
    }

    #[test]
    fn parallel_contracts_merge() {
        let mut b = SystemBuilder::<Q>::new();
        b.bank("a", q(0, 1)).bank("b", q(0, 1)).bank("c", q(0, 1));
        b.debt("a", "b", q(1, 1)).debt("a", "b", q(1, 2));
        b.cds("a", "b", "c", q(1, 1)).cds("a", "b", "c", q(2, 1));
        let s = b.build().unwrap();
        assert_eq!(s.debts().len(), 1);
        assert_eq!(s.debts()[0].weight, q(3, 2));
        assert_eq!(s.cdss().len(), 1);
        assert_eq!(s.cdss()[0].weight, q(3, 1));
    }

    fn small_system() -> impl Strategy<Value = (FinancialSystem<Q>, Vec<Q>)> {
        let n = 4usize;
        (
            proptest::collection::vec(0i64..4, n),
            proptest::collection::vec((0..n, 0..n, 1i64..4), 0..6),
            proptest::collection::vec((0..n, 0..n, 0..n, 1i64..4), 0..6),
            proptest::collection::vec(0i64..=4, n),
        )
            .prop_map(move |(assets, debts, cdss, rates)| {
                let mut b = SystemBuilder::new();
                for (i, e) in assets.iter().enumerate() {
                    b.bank(format!("b{i}"), Q::from_int(*e));
                }
                for (d, c, w) in debts.into_iter().filter(|(d, c, _)| d != c) {
                    b.debt(format!("b{d}"), format!("b{c}"), Q::from_int(w));
                }
                for (d, c, r, w) in cdss
                    .into_iter()
                    .filter(|(d, c, r, _)| d != c && r != d && r != c)
                {
                    b.cds(
                        format!("b{d}"),
                        format!("b{c}"),
                        format!("b{r}"),
                        Q::from_int(w),
                    );
                }
                let rates = rates.into_iter().map(|x| Q::from_frac(x, 4)).collect();
                (b.build().unwrap(), rates)
            })
    }

    proptest! {
        #[test]
        fn payments_never_exceed_liabilities((s, rates) in small_system()) {
            let r = RecoveryVector::from_vec(rates).unwrap();
            let e = s.evaluate(&r).unwrap();
            for (&(u, v), l) in &e.pairwise_liabilities {
                let p = e.payment(u, v);
                prop_assert!(!p.is_negative() && &p <= l);
                let full = &p == l;
                prop_assert_eq!(full, r.get(u).is_one() || l.is_zero());
            }
            let again = s.evaluate(&r).unwrap();
            prop_assert_eq!(e, again);
        }

        #[test]
        fn liability_slope_in_reference((s, rates) in small_system(), bump in 1i64..4) {
            let r = RecoveryVector::from_vec(rates).unwrap();
            for (i, c) in s.cdss().iter().enumerate() {
                let mut lower = r.clone();
                let base = r.get(c.reference).clone();
                let dropped = crate::scalar::clamp_unit(base.clone() - Q::from_frac(bump, 4));
                lower.set(c.reference, dropped.clone());
                let before = s.pairwise_liability_at(&r, c.debtor, c.creditor);
                let after = s.pairwise_liability_at(&lower, c.debtor, c.creditor);
                let _ = i;
                let slope: Q = s
                    .cdss()
                    .iter()
                    .filter(|d| d.debtor == c.debtor && d.creditor == c.creditor && d.reference == c.reference)
                    .map(|d| d.weight.clone())
                    .sum();
                prop_assert_eq!(after - before, slope * (base - dropped));
            }
        }

        #[test]
        fn recovery_function_is_monotone(a in 0i64..10, b in 0i64..10, l in 1i64..10, m in 1i64..10) {
            let (a, b) = (Q::from_int(a.min(b)), Q::from_int(a.max(b)));
            let (l, m) = (Q::from_int(l.min(m)), Q::from_int(l.max(m)));
            let ra = recovery_function(&a, &l).unwrap();
            prop_assert!(ra <= recovery_function(&b, &l).unwrap());
            prop_assert!(recovery_function(&a, &m).unwrap() <= ra);
            prop_assert!(ra.is_unit_interval());
        }

        #[test]
        fn equilibria_balance_defaulters((s, rates) in small_system()) {
            let r = RecoveryVector::from_vec(rates).unwrap();
            if s.is_equilibrium(&r).unwrap().holds {
                let e = s.evaluate(&r).unwrap();
                for v in 0..s.len() {
                    if !r.get(v).is_one() {
                        prop_assert_eq!(e.assets[v].clone(), r.get(v).clone() * e.total_liability[v].clone());
                    }
                }
            }
        }
    }
}
