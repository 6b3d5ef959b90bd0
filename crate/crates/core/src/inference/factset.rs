use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::fol::{Literal, Symbol, Term};

/// Ground positive atoms of one window, indexed by predicate and then by
/// argument tuple (so lookups on a bound first argument are range scans).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSet {
    window_id: u64,
    facts: BTreeMap<Symbol, BTreeSet<Vec<Term>>>,
}

impl FactSet {
    pub fn new(window_id: u64) -> Self {
        FactSet {
            window_id,
            facts: BTreeMap::new(),
        }
    }

    pub fn from_literals(window_id: u64, lits: impl IntoIterator<Item = Literal>) -> Result<Self, InferenceError> {
        let mut fs = FactSet::new(window_id);
        for l in lits {
            fs.insert(l)?;
        }
        Ok(fs)
    }

    pub fn window_id(&self) -> u64 {
        self.window_id
    }

    pub fn with_window_id(mut self, window_id: u64) -> Self {
        self.window_id = window_id;
        self
    }

    /// Adds a fact; returns whether it was new.
    pub fn insert(&mut self, l: Literal) -> Result<bool, InferenceError> {
        if l.negated || !l.is_ground() || l.is_equality() || l.args.iter().any(|t| matches!(t, Term::App(..))) {
            return Err(InferenceError::NotAFact(l.to_string()));
        }
        Ok(self.facts.entry(l.predicate).or_default().insert(l.args))
    }

    pub(crate) fn insert_tuple(&mut self, predicate: &str, args: Vec<Term>) -> bool {
        match self.facts.get_mut(predicate) {
            Some(set) => set.insert(args),
            None => self.facts.entry(predicate.to_string()).or_default().insert(args),
        }
    }

    pub fn contains(&self, l: &Literal) -> bool {
        self.contains_tuple(&l.predicate, &l.args)
    }

    pub fn contains_tuple(&self, predicate: &str, args: &[Term]) -> bool {
        self.facts.get(predicate).is_some_and(|s| s.contains(args))
    }

    pub fn len(&self) -> usize {
        self.facts.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All facts ordered by predicate, then arguments.
    pub fn iter(&self) -> impl Iterator<Item = Literal> + '_ {
        self.facts
            .iter()
            .flat_map(|(p, set)| set.iter().map(move |args| Literal::new(p.clone(), args.clone())))
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Symbol> {
        self.facts.iter().filter(|(_, s)| !s.is_empty()).map(|(p, _)| p)
    }

    pub fn tuples(&self, predicate: &str) -> impl Iterator<Item = &Vec<Term>> {
        self.facts.get(predicate).into_iter().flatten()
    }

    /// Tuples of `predicate` whose first argument is `first`.
    pub fn tuples_with_first<'a>(&'a self, predicate: &str, first: &'a Term) -> impl Iterator<Item = &'a Vec<Term>> + 'a {
        self.facts
            .get(predicate)
            .into_iter()
            .flat_map(move |set| set.range(vec![first.clone()]..).take_while(move |t| t.first() == Some(first)))
    }

    /// Facts that mention `constant` in any position.
    pub fn mentioning<'a>(&'a self, constant: &'a str) -> impl Iterator<Item = Literal> + 'a {
        self.iter()
            .filter(move |l| l.args.iter().any(|t| t.as_const() == Some(constant)))
    }

    /// Every constant occurring in some fact, sorted.
    pub fn constants(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for set in self.facts.values() {
            for args in set {
                out.extend(args.iter().filter_map(|t| t.as_const().map(str::to_string)));
            }
        }
        out
    }

    pub fn extend(&mut self, other: &FactSet) {
        for (p, set) in &other.facts {
            self.facts.entry(p.clone()).or_default().extend(set.iter().cloned());
        }
    }

    /// Same facts regardless of window id.
    pub fn same_facts(&self, other: &FactSet) -> bool {
        self.iter().eq(other.iter())
    }

    /// One fact per line in the text syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in self.iter() {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out
    }
}
