//! Greatest clearing vector of fixed-liability networks, and the two network
//! rewrites (frozen snapshot, optimistic redirection to a sink) that the smart
//! and optimistic update rules feed into it.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::model::{FinancialSystem, RecoveryVector, SystemBuilder};
use crate::policy::{Policy, TargetRule};
use crate::scalar::{clamp_unit, Scalar};

/// Index-based debt network used on the hot path of the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebtNetwork<S> {
    pub assets: Vec<S>,
    pub debts: Vec<(usize, usize, S)>,
}

/// A debt-only system, optionally with a designated sink bank that absorbs
/// payments and owes nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebtOnlySystem<S> {
    system: FinancialSystem<S>,
    sink: Option<usize>,
}

pub const SINK_ID: &str = "$sink";

impl<S: Scalar> DebtOnlySystem<S> {
    pub fn new(system: FinancialSystem<S>) -> Result<Self> {
        if !system.is_debt_only() {
            return Err(Error::NotDebtOnly);
        }
        Ok(DebtOnlySystem { system, sink: None })
    }

    pub fn with_sink(system: FinancialSystem<S>, sink: &str) -> Result<Self> {
        if !system.is_debt_only() {
            return Err(Error::NotDebtOnly);
        }
        let s = system.index_of(sink)?;
        if system.debts().iter().any(|d| d.debtor == s) {
            return Err(Error::Contract("sink bank must not owe anything".into()));
        }
        Ok(DebtOnlySystem {
            system,
            sink: Some(s),
        })
    }

    pub fn system(&self) -> &FinancialSystem<S> {
        &self.system
    }

    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    fn network(&self) -> DebtNetwork<S> {
        DebtNetwork {
            assets: self
                .system
                .banks()
                .iter()
                .map(|b| b.external_assets.clone())
                .collect(),
            debts: self
                .system
                .debts()
                .iter()
                .map(|d| (d.debtor, d.creditor, d.weight.clone()))
                .collect(),
        }
    }

    fn from_network(names: &FinancialSystem<S>, net: &DebtNetwork<S>, with_sink: bool) -> Self {
        let mut b = SystemBuilder::new();
        let mut sink_id = SINK_ID.to_string();
        while names.index_of(&sink_id).is_ok() {
            sink_id.push('_');
        }
        let id = |i: usize| -> String {
            if i < names.len() {
                names.id(i).to_string()
            } else {
                sink_id.clone()
            }
        };
        for (i, e) in net.assets.iter().enumerate() {
            b.bank(id(i), e.clone());
        }
        for (u, v, w) in &net.debts {
            b.debt(id(*u), id(*v), w.clone());
        }
        let system = b.build().expect("rewritten network is valid");
        let sink = with_sink.then_some(names.len());
        DebtOnlySystem { system, sink }
    }
}

/// Greatest clearing vector of a debt-only system.
pub fn greatest_clearing_vector<S: Scalar>(system: &DebtOnlySystem<S>) -> RecoveryVector<S> {
    RecoveryVector::from_vec(clear_network(&system.network())).expect("clearing rates lie in [0,1]")
}

/// Same as [`greatest_clearing_vector`] but rejects systems with CDSs.
pub fn clear_system<S: Scalar>(system: &FinancialSystem<S>) -> Result<RecoveryVector<S>> {
    Ok(greatest_clearing_vector(&DebtOnlySystem::new(
        system.clone(),
    )?))
}

/// Every CDS becomes a debt of its current obligation `δ·(1 − r_w)`.
pub fn freeze_snapshot<S: Scalar>(
    system: &FinancialSystem<S>,
    rates: &RecoveryVector<S>,
) -> Result<DebtOnlySystem<S>> {
    system.check_rates(rates)?;
    let net = snapshot_network(system, rates, None);
    Ok(DebtOnlySystem::from_network(system, &net, false))
}

/// Frozen snapshot, then every contract owed by a bank with `r_u = 1` is
/// moved to an artificial sink while its creditor is credited in full.
pub fn optimistic_rewrite<S: Scalar>(
    system: &FinancialSystem<S>,
    rates: &RecoveryVector<S>,
) -> Result<DebtOnlySystem<S>> {
    system.check_rates(rates)?;
    let net = optimistic_network(system, rates, None);
    Ok(DebtOnlySystem::from_network(system, &net, true))
}

/// Tentative recovery rates under the smart or optimistic rule.
pub fn tentative_rates<S: Scalar>(
    system: &FinancialSystem<S>,
    rates: &RecoveryVector<S>,
    policy: Policy,
) -> Result<RecoveryVector<S>> {
    system.check_rates(rates)?;
    let tentative = tentative_with(system, rates, None, policy.rule)
        .ok_or_else(|| Error::Contract(format!("policy `{policy}` has no tentative rates")))?;
    RecoveryVector::from_vec(tentative)
}

pub(crate) fn tentative_with<S: Scalar>(
    system: &FinancialSystem<S>,
    rates: &RecoveryVector<S>,
    frozen: Option<&BTreeMap<usize, S>>,
    rule: TargetRule,
) -> Option<Vec<S>> {
    let net = match rule {
        TargetRule::Naive => return None,
        TargetRule::Smart => snapshot_network(system, rates, frozen),
        TargetRule::Optimistic => optimistic_network(system, rates, frozen),
    };
    let mut cleared = clear_network(&net);
    cleared.truncate(system.len());
    Some(cleared)
}

pub(crate) fn snapshot_network<S: Scalar>(
    system: &FinancialSystem<S>,
    rates: &RecoveryVector<S>,
    frozen: Option<&BTreeMap<usize, S>>,
) -> DebtNetwork<S> {
    let mut debts: BTreeMap<(usize, usize), S> = BTreeMap::new();
    let mut add = |u: usize, v: usize, w: S| {
        if !w.is_zero() {
            let e = debts.entry((u, v)).or_insert_with(S::zero);
            *e = e.clone() + w;
        }
    };
    for d in system.debts() {
        add(d.debtor, d.creditor, d.weight.clone());
    }
    for (i, c) in system.cdss().iter().enumerate() {
        let w = match frozen.and_then(|f| f.get(&i)) {
            Some(w) => w.clone(),
            None => system.cds_obligation(i, rates),
        };
        add(c.debtor, c.creditor, w);
    }
    DebtNetwork {
        assets: system
            .banks()
            .iter()
            .map(|b| b.external_assets.clone())
            .collect(),
        debts: debts.into_iter().map(|((u, v), w)| (u, v, w)).collect(),
    }
}

pub(crate) fn optimistic_network<S: Scalar>(
    system: &FinancialSystem<S>,
    rates: &RecoveryVector<S>,
    frozen: Option<&BTreeMap<usize, S>>,
) -> DebtNetwork<S> {
    let snap = snapshot_network(system, rates, frozen);
    let sink = system.len();
    let mut assets = snap.assets;
    assets.push(S::zero());
    let mut to_sink: BTreeMap<usize, S> = BTreeMap::new();
    let mut debts = Vec::with_capacity(snap.debts.len());
    for (u, v, w) in snap.debts {
        if rates.get(u).is_one() {
            assets[v] = assets[v].clone() + w.clone();
            let e = to_sink.entry(u).or_insert_with(S::zero);
            *e = e.clone() + w;
        } else {
            debts.push((u, v, w));
        }
    }
    debts.extend(to_sink.into_iter().map(|(u, w)| (u, sink, w)));
    DebtNetwork { assets, debts }
}

/// Greatest clearing recovery rates of a debt network.
///
/// Strongly connected components of the payment graph are cleared upstream
/// first. Inside a component the fictitious-default iteration solves the
/// balance equations of the cumulative default set; the only singular case, a
/// closed component with no inflow, has a one-dimensional solution space and
/// takes its largest member inside the liability box.
pub fn clear_network<S: Scalar>(net: &DebtNetwork<S>) -> Vec<S> {
    let n = net.assets.len();
    let mut pair: BTreeMap<(usize, usize), S> = BTreeMap::new();
    let mut total = vec![S::zero(); n];
    for (u, v, w) in &net.debts {
        let e = pair.entry((*u, *v)).or_insert_with(S::zero);
        *e = e.clone() + w.clone();
        total[*u] = total[*u].clone() + w.clone();
    }
    // share[u] = list of (creditor, l_uv / l_u)
    let mut share: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    for (&(u, v), w) in &pair {
        share[u].push((v, w.clone() / total[u].clone()));
    }

    let mut graph = DiGraph::<usize, ()>::with_capacity(n, pair.len());
    let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
    for &(u, v) in pair.keys() {
        if !total[v].is_zero() {
            graph.add_edge(nodes[u], nodes[v], ());
        }
    }
    let mut components = tarjan_scc(&graph);
    components.reverse();

    // paid[u] = r_u · l_u
    let mut paid = total.clone();
    let mut inflow: Vec<S> = net.assets.clone();
    for component in components {
        let members: Vec<usize> = component.iter().map(|ix| graph[*ix]).collect();
        let active: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&v| !total[v].is_zero())
            .collect();
        if !active.is_empty() {
            clear_component(&active, &share, &total, &inflow, &mut paid);
        }
        for &u in &members {
            for (v, s) in &share[u] {
                if !members.contains(v) {
                    inflow[*v] = inflow[*v].clone() + s.clone() * paid[u].clone();
                }
            }
        }
    }

    (0..n)
        .map(|v| {
            if total[v].is_zero() {
                S::one()
            } else {
                clamp_unit(paid[v].clone() / total[v].clone())
            }
        })
        .collect()
}

fn clear_component<S: Scalar>(
    members: &[usize],
    share: &[Vec<(usize, S)>],
    total: &[S],
    inflow: &[S],
    paid: &mut [S],
) {
    let k = members.len();
    let pos = |v: usize| members.iter().position(|&m| m == v);
    // internal[i] = list of (j, share) for payments from members[i] to members[j]
    let internal: Vec<Vec<(usize, S)>> = members
        .iter()
        .map(|&u| {
            share[u]
                .iter()
                .filter_map(|(v, s)| pos(*v).map(|j| (j, s.clone())))
                .collect()
        })
        .collect();
    let closed = internal.iter().all(|row| {
        row.iter()
            .fold(S::zero(), |acc, (_, s)| acc + s.clone())
            .is_one()
    });
    let no_inflow = members.iter().all(|&v| inflow[v].is_zero());

    if closed && no_inflow && k > 1 {
        // y = A y has a one-dimensional solution space; scale it to the box.
        let mut mat = vec![vec![S::zero(); k]; k];
        let mut rhs = vec![S::zero(); k];
        for (i, row) in internal.iter().enumerate() {
            for (j, s) in row {
                mat[*j][i] = mat[*j][i].clone() - s.clone();
            }
        }
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = row[i].clone() + S::one();
        }
        mat[0] = vec![S::zero(); k];
        mat[0][0] = S::one();
        rhs[0] = S::one();
        let stationary =
            solve_linear(mat, rhs).expect("irreducible closed class has a stationary vector");
        let scale = members
            .iter()
            .zip(&stationary)
            .map(|(&v, p)| total[v].clone() / p.clone())
            .min()
            .expect("non-empty component");
        for (&v, p) in members.iter().zip(&stationary) {
            paid[v] = scale.clone() * p.clone();
        }
        return;
    }

    let mut defaulting = vec![false; k];
    for i in 0..k {
        paid[members[i]] = total[members[i]].clone();
    }
    loop {
        let mut received: Vec<S> = members.iter().map(|&v| inflow[v].clone()).collect();
        for (i, row) in internal.iter().enumerate() {
            for (j, s) in row {
                received[*j] = received[*j].clone() + s.clone() * paid[members[i]].clone();
            }
        }
        let mut grew = false;
        for i in 0..k {
            if !defaulting[i] && received[i] < total[members[i]] {
                defaulting[i] = true;
                grew = true;
            }
        }
        if !grew {
            return;
        }
        let idx: Vec<usize> = (0..k).filter(|&i| defaulting[i]).collect();
        let m = idx.len();
        let mut mat = vec![vec![S::zero(); m]; m];
        let mut rhs: Vec<S> = idx.iter().map(|&i| inflow[members[i]].clone()).collect();
        for (row, &i) in idx.iter().enumerate() {
            mat[row][row] = S::one();
            let _ = i;
        }
        for (src, row) in internal.iter().enumerate() {
            for (dst, s) in row {
                let Some(r) = idx.iter().position(|&i| i == *dst) else {
                    continue;
                };
                match idx.iter().position(|&i| i == src) {
                    Some(c) => mat[r][c] = mat[r][c].clone() - s.clone(),
                    None => rhs[r] = rhs[r].clone() + s.clone() * total[members[src]].clone(),
                }
            }
        }
        let solution = solve_linear(mat, rhs).expect("default set with leakage is non-singular");
        for (&i, y) in idx.iter().zip(solution) {
            let v = members[i];
            paid[v] = clamp_unit(y / total[v].clone()) * total[v].clone();
        }
    }
}

/// Exact Gaussian elimination; `None` when the matrix is singular.
pub(crate) fn solve_linear<S: Scalar>(mut mat: Vec<Vec<S>>, mut rhs: Vec<S>) -> Option<Vec<S>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !mat[r][col].is_zero())?;
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = mat[col][col].clone();
        for x in &mut mat[col][col..] {
            *x = x.clone() / p.clone();
        }
        rhs[col] = rhs[col].clone() / p;
        let pivot_row = mat[col].clone();
        for r in 0..n {
            if r == col || mat[r][col].is_zero() {
                continue;
            }
            let f = mat[r][col].clone();
            for (x, y) in mat[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x = x.clone() - f.clone() * y.clone();
            }
            rhs[r] = rhs[r].clone() - f * rhs[col].clone();
        }
    }
    Some(rhs)
}
