use std::fmt;

use crate::error::{Error, Result};

/// A CNF formula over variables `1..=k`; literal `-i` is the negation of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    variables: usize,
    clauses: Vec<Vec<i64>>,
}

impl CnfFormula {
    pub fn new(variables: usize, clauses: Vec<Vec<i64>>) -> Result<Self> {
        for clause in &clauses {
            if clause.is_empty() {
                return Err(Error::InvalidFormula("empty clause".into()));
            }
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > variables {
                    return Err(Error::InvalidFormula(format!(
                        "literal {lit} outside variables 1..={variables}"
                    )));
                }
            }
        }
        Ok(CnfFormula { variables, clauses })
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn clauses(&self) -> &[Vec<i64>] {
        &self.clauses
    }

    /// Number of clauses satisfied by an assignment of variables `1..=k`.
    pub fn satisfied_by(&self, value: impl Fn(usize) -> bool) -> usize {
        self.clauses
            .iter()
            .filter(|c| {
                c.iter()
                    .any(|&lit| value(lit.unsigned_abs() as usize) == (lit > 0))
            })
            .count()
    }

    /// Compact form: clauses separated by `;`, literals by spaces or commas.
    /// The variable count is `k` if given, otherwise the largest variable.
    pub fn parse_compact(text: &str, k: Option<usize>) -> Result<Self> {
        let mut clauses = Vec::new();
        for part in text.split(';') {
            let lits = part
                .split([',', ' '])
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::InvalidFormula(format!("bad literal `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if lits.is_empty() && part.trim().is_empty() {
                continue;
            }
            clauses.push(lits);
        }
        let k = k.unwrap_or_else(|| max_var(&clauses));
        CnfFormula::new(k, clauses)
    }

    /// DIMACS: `c` comment lines, an optional `p cnf k m` header, and
    /// zero-terminated clauses.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut declared = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(header) = line.strip_prefix('p') {
                let fields: Vec<&str> = header.split_whitespace().collect();
                match fields.as_slice() {
                    ["cnf", k, _m] => {
                        declared =
                            Some(k.parse::<usize>().map_err(|_| {
                                Error::InvalidFormula(format!("bad header `{line}`"))
                            })?);
                    }
                    _ => return Err(Error::InvalidFormula(format!("bad header `{line}`"))),
                }
                continue;
            }
            for token in line.split_whitespace() {
                let lit: i64 = token
                    .parse()
                    .map_err(|_| Error::InvalidFormula(format!("bad literal `{token}`")))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    current.push(lit);
                }
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        let k = declared.unwrap_or_else(|| max_var(&clauses));
        CnfFormula::new(k, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.variables, self.clauses.len());
        for c in &self.clauses {
            for lit in c {
                out.push_str(&format!("{lit} "));
            }
            out.push_str("0\n");
        }
        out
    }
}

fn max_var(clauses: &[Vec<i64>]) -> usize {
    clauses
        .iter()
        .flatten()
        .map(|l| l.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_literals() {
        assert!(CnfFormula::new(1, vec![vec![2]]).is_err());
        assert!(CnfFormula::new(1, vec![vec![]]).is_err());
        assert!(CnfFormula::new(1, vec![vec![0]]).is_err());
    }

    #[test]
    fn compact_and_dimacs_agree() {
        let a = CnfFormula::parse_compact("1 2; -1 -2", None).unwrap();
        let b = CnfFormula::parse_dimacs("c demo\np cnf 2 2\n1 2 0\n-1 -2 0\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(CnfFormula::parse_dimacs(&a.to_dimacs()).unwrap(), a);
        assert_eq!(a.to_string(), "1 2; -1 -2");
    }

    #[test]
    fn counts_satisfied_clauses() {
        let f = CnfFormula::parse_compact("1; -1; 1 2", None).unwrap();
        assert_eq!(f.satisfied_by(|_| true), 2);
        assert_eq!(f.satisfied_by(|_| false), 1);
    }

    #[test]
    fn explicit_variable_count_allows_unused_variables() {
        let f = CnfFormula::parse_compact("", Some(2)).unwrap();
        assert_eq!((f.variables(), f.clauses().len()), (2, 0));
    }
}
