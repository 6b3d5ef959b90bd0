//! Query answering over ground facts and stratified rules.
//!
//! Forward chaining computes the stratified least model under the
//! closed-world assumption; queries are then answered against it. A
//! resolution-refutation prover answers ground queries from the rules
//! directly, and a brute-force model builder serves as a test oracle.

mod engine;
mod factset;
mod oracle;
mod refute;
mod trace;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fol::{FolError, Literal, Substitution, Symbol, Term};
use crate::logicpad::LogicPadError;

pub use engine::{object_domain, resolve, resolve_with, saturate, saturate_with, Saturation};
pub use factset::FactSet;
pub use oracle::{brute_force_models, random_kb, RandomKbConfig, HERBRAND_LIMIT};
pub use refute::{refute, Refutation};
pub use trace::{check_trace, ProofStep, ProofTrace};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InferenceError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(Symbol),
    #[error("`{name}` has arity {expected} but is used with {found} arguments")]
    ArityMismatch { name: Symbol, expected: usize, found: usize },
    #[error(transparent)]
    Rules(#[from] LogicPadError),
    #[error("derivation depth bound {0} exceeded")]
    DepthExceeded(usize),
    #[error("fact `{0}` is not a ground positive atom")]
    NotAFact(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("refutation mode needs a ground query, `{0}` has variables")]
    NonGroundQuery(String),
    #[error("Herbrand base of {0} atoms exceeds the oracle limit")]
    OracleTooLarge(usize),
    #[error(transparent)]
    Function(#[from] FolError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Longest allowed chain of rule applications behind one fact.
    pub depth_bound: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { depth_bound: 64 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolveMode {
    /// Saturate, then match the query against the model.
    #[default]
    Forward,
    /// Refute the negated (ground) query over the rule clauses.
    Refutation,
}

/// A conjunctive query. Conjuncts keep their surface form, function
/// equalities included; they are flattened when the query is run.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub conjuncts: Vec<Literal>,
}

impl Query {
    pub fn new(conjuncts: Vec<Literal>) -> Result<Query, InferenceError> {
        if conjuncts.is_empty() {
            return Err(InferenceError::InvalidQuery("empty conjunction".into()));
        }
        let generator = conjuncts
            .iter()
            .any(|l| !l.negated && (!l.is_equality() || l.args.iter().any(|t| matches!(t, Term::App(..)))));
        if !generator {
            return Err(InferenceError::InvalidQuery(
                "at least one positive conjunct is required".into(),
            ));
        }
        Ok(Query { conjuncts })
    }

    /// Variables named by the user, sorted.
    pub fn vars(&self) -> Vec<Symbol> {
        let mut out = std::collections::BTreeSet::new();
        for l in &self.conjuncts {
            out.extend(l.vars());
        }
        out.into_iter().collect()
    }

    pub fn is_ground(&self) -> bool {
        self.conjuncts.iter().all(|l| l.is_ground())
    }

    /// Constants mentioned anywhere in the query.
    pub fn constants(&self) -> Vec<Symbol> {
        fn walk(t: &Term, out: &mut std::collections::BTreeSet<Symbol>) {
            match t {
                Term::Const(c) => {
                    out.insert(c.clone());
                }
                Term::Var(_) => {}
                Term::App(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = std::collections::BTreeSet::new();
        for l in &self.conjuncts {
            l.args.iter().for_each(|t| walk(t, &mut out));
        }
        out.into_iter().collect()
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub truth: bool,
    /// Every satisfying binding of the query variables, in lexicographic order.
    pub bindings: Vec<Substitution>,
    /// Derivations behind the witnesses, in derivation order.
    pub trace: ProofTrace,
    /// Base facts the verdict rests on.
    pub support: Vec<Literal>,
}
