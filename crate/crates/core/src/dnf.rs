//! Boolean DNF formulae as prototype matrices.
//!
//! A term with `k` literals becomes a row with `+1` for each positive
//! literal, `-1` for each negated one and 0 elsewhere. For `x` in
//! `{-1, +1}^n` the term holds exactly when `w . x = k`, otherwise
//! `w . x <= k - 2`, so the formula holds iff `max_j w_j . x >= k`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::losses::PrototypeMatrix;
use crate::matrix::{dot, Matrix};
use crate::model::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, positive: false }
    }

    fn holds(self, x: f64) -> bool {
        (x > 0.0) == self.positive
    }
}

/// An OR of ANDs over `n` named Boolean variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnfFormula {
    terms: Vec<Vec<Literal>>,
    names: Vec<String>,
}

impl DnfFormula {
    /// Variables are named `x0 .. x{n-1}`.
    pub fn new(terms: Vec<Vec<Literal>>, n: usize) -> Result<Self> {
        DnfFormula::with_names(terms, (0..n).map(|i| format!("x{i}")).collect())
    }

    pub fn with_names(terms: Vec<Vec<Literal>>, names: Vec<String>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Dnf(String::from("formula has no terms")));
        }
        for (t, term) in terms.iter().enumerate() {
            if term.is_empty() {
                return Err(Error::Dnf(format!("term {t} is empty")));
            }
            let mut seen = BTreeSet::new();
            for lit in term {
                if lit.var >= names.len() {
                    return Err(Error::Dnf(format!(
                        "term {t} uses variable {} of only {}",
                        lit.var,
                        names.len()
                    )));
                }
                if !seen.insert(lit.var) {
                    return Err(Error::Dnf(format!(
                        "term {t} repeats variable {}",
                        names[lit.var]
                    )));
                }
            }
        }
        Ok(DnfFormula { terms, names })
    }

    /// Parses `"A & !B | !C & D"`. Variables are numbered by first
    /// appearance unless `names` fixes the order.
    pub fn parse(text: &str, names: Option<&[String]>) -> Result<Self> {
        let mut vars: Vec<String> = names.map(<[String]>::to_vec).unwrap_or_default();
        let mut terms = Vec::new();
        for chunk in text.split('|') {
            let mut term = Vec::new();
            for raw in chunk.split('&') {
                let raw = raw.trim();
                let (positive, name) = match raw.strip_prefix('!') {
                    Some(rest) => (false, rest.trim()),
                    None => (true, raw),
                };
                if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == '!') {
                    return Err(Error::Dnf(format!("bad literal {raw:?}")));
                }
                let var = match vars.iter().position(|v| v == name) {
                    Some(v) => v,
                    None if names.is_none() => {
                        vars.push(name.to_string());
                        vars.len() - 1
                    }
                    None => return Err(Error::Dnf(format!("unknown variable {name:?}"))),
                };
                term.push(Literal { var, positive });
            }
            terms.push(term);
        }
        DnfFormula::with_names(terms, vars)
    }

    pub fn terms(&self) -> &[Vec<Literal>] {
        &self.terms
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    /// Common term size, if every term has the same number of literals.
    pub fn term_size(&self) -> Option<usize> {
        let k = self.terms[0].len();
        self.terms.iter().all(|t| t.len() == k).then_some(k)
    }

    /// Direct logical evaluation.
    pub fn evaluate(&self, x: &[f64]) -> Result<bool> {
        self.check_assignment(x)?;
        Ok(self
            .terms
            .iter()
            .any(|term| term.iter().all(|lit| lit.holds(x[lit.var]))))
    }

    /// Threshold evaluation `max_j w_j . x >= k` through [`encode_dnf`].
    pub fn satisfied(&self, x: &[f64]) -> Result<bool> {
        self.check_assignment(x)?;
        let (w, k) = encode_dnf(self)?;
        let holds = w.row_iter().any(|row| dot(row, x) >= k as f64);
        Ok(holds)
    }

    fn check_assignment(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                context: "assignment",
                expected: self.n_vars(),
                found: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Dnf(format!("assignment entry {i} is {} (need -1 or 1)", x[i])));
        }
        Ok(())
    }
}

impl fmt::Display for DnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, term) in self.terms.iter().enumerate() {
            if t > 0 {
                f.write_str(" | ")?;
            }
            for (l, lit) in term.iter().enumerate() {
                if l > 0 {
                    f.write_str(" & ")?;
                }
                if !lit.positive {
                    f.write_str("!")?;
                }
                f.write_str(&self.names[lit.var])?;
            }
        }
        Ok(())
    }
}

/// Prototype matrix in `{-1, 0, 1}^{p x n}` and the term size `k`.
pub fn encode_dnf(f: &DnfFormula) -> Result<(PrototypeMatrix, usize)> {
    let k = f
        .term_size()
        .ok_or_else(|| Error::Dnf(String::from("terms have different sizes")))?;
    let mut w = Matrix::zeros(f.terms.len(), f.n_vars());
    for (j, term) in f.terms.iter().enumerate() {
        for lit in term {
            w[(j, lit.var)] = if lit.positive { 1.0 } else { -1.0 };
        }
    }
    Ok((PrototypeMatrix::new(w)?, k))
}

/// [`DnfFormula::satisfied`] as a free function.
pub fn dnf_satisfied(f: &DnfFormula, x: &[f64]) -> Result<bool> {
    f.satisfied(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTerm {
    pub feature: String,
    pub index: usize,
    /// Weight on the standardized feature.
    pub weight: f64,
    /// The feature is in the support of another prototype too.
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeRule {
    pub prototype: usize,
    pub bias: f64,
    pub terms: Vec<RuleTerm>,
}

/// Supports of a trained model, readable as text.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleReport {
    pub prototypes: Vec<PrototypeRule>,
}

impl fmt::Display for RuleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.prototypes {
            writeln!(f, "prototype {}", rule.prototype)?;
            if rule.bias != 0.0 {
                writeln!(f, "  bias: {:+}", rule.bias)?;
            }
            for t in &rule.terms {
                write!(f, "  {}: {:+}", t.feature, t.weight)?;
                if t.shared {
                    f.write_str(" (shared)")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Per prototype, the non-zero weights by decreasing magnitude, at most `top`.
pub fn extract_rules(model: &TrainedModel, top: usize) -> RuleReport {
    let w = model.weights();
    let mut users = vec![0usize; w.cols()];
    for row in w.row_iter() {
        for (c, v) in row.iter().enumerate() {
            if *v != 0.0 {
                users[c] += 1;
            }
        }
    }
    let prototypes = w
        .row_iter()
        .enumerate()
        .map(|(j, row)| {
            let mut support: Vec<usize> = (0..row.len()).filter(|&c| row[c] != 0.0).collect();
            support.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()).then(a.cmp(&b)));
            support.truncate(top);
            PrototypeRule {
                prototype: j,
                bias: model.bias()[j],
                terms: support
                    .into_iter()
                    .map(|c| RuleTerm {
                        feature: model.feature_names()[c].clone(),
                        index: c,
                        weight: row[c],
                        shared: users[c] > 1,
                    })
                    .collect(),
            }
        })
        .collect();
    RuleReport { prototypes }
}
