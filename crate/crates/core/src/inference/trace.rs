use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FactSet;
use crate::fol::{unify, Apply, Literal, Substitution};
use crate::logicpad::{RuleDecl, RuleSet};

/// One rule application: `derived` follows from `rule` given the positive
/// `premises` and the absence of every atom in `absent`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub derived: Literal,
    pub rule: String,
    pub premises: Vec<Literal>,
    pub absent: Vec<Literal>,
}

impl fmt::Display for ProofStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- {}(", self.derived, self.rule)?;
        let mut first = true;
        for p in &self.premises {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
            first = false;
        }
        for a in &self.absent {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "!{a}")?;
            first = false;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofTrace {
    pub steps: Vec<ProofStep>,
}

impl ProofTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The steps needed to derive `targets`, in original order, together with
    /// the base facts at the leaves. Targets that no step derives are treated
    /// as base facts.
    pub fn ancestors<'a>(&self, targets: impl IntoIterator<Item = &'a Literal>) -> (ProofTrace, Vec<Literal>) {
        let by_fact: BTreeMap<&Literal, usize> =
            self.steps.iter().enumerate().map(|(i, s)| (&s.derived, i)).collect();
        let mut keep = BTreeSet::new();
        let mut leaves = BTreeSet::new();
        let mut stack: Vec<&Literal> = targets.into_iter().collect();
        let mut seen = BTreeSet::new();
        while let Some(l) = stack.pop() {
            if !seen.insert(l) {
                continue;
            }
            match by_fact.get(l) {
                Some(&i) => {
                    keep.insert(i);
                    stack.extend(self.steps[i].premises.iter());
                }
                None => {
                    leaves.insert(l.clone());
                }
            }
        }
        let steps = keep.into_iter().map(|i| self.steps[i].clone()).collect();
        (ProofTrace { steps }, leaves.into_iter().collect())
    }
}

impl fmt::Display for ProofTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// True iff every step instantiates its named rule, every premise is a base
/// fact or was derived by an earlier step, and no absent atom is a base fact
/// or derived anywhere in the trace.
pub fn check_trace(t: &ProofTrace, base: &FactSet, rules: &RuleSet) -> bool {
    let derived_anywhere: BTreeSet<&Literal> = t.steps.iter().map(|s| &s.derived).collect();
    let mut available: BTreeSet<&Literal> = BTreeSet::new();
    for step in &t.steps {
        let Some(rule) = rules.rule(&step.rule) else {
            return false;
        };
        if instantiation(rule, step).is_none() {
            return false;
        }
        if !step.premises.iter().all(|p| base.contains(p) || available.contains(p)) {
            return false;
        }
        if step.absent.iter().any(|a| base.contains(a) || derived_anywhere.contains(a)) {
            return false;
        }
        available.insert(&step.derived);
    }
    true
}

/// The ground substitution that maps `rule` onto `step`, if there is one.
pub(crate) fn instantiation(rule: &RuleDecl, step: &ProofStep) -> Option<Substitution> {
    if !step.derived.is_ground() || step.derived.negated {
        return None;
    }
    let mut s = unify(&rule.head, &step.derived, &Substitution::new())?;
    let pos: Vec<&Literal> = rule.positive_body().filter(|l| !l.is_equality()).collect();
    let neg: Vec<&Literal> = rule.negative_body().filter(|l| !l.is_equality()).collect();
    if pos.len() != step.premises.len() || neg.len() != step.absent.len() {
        return None;
    }
    for (l, p) in pos.iter().zip(&step.premises) {
        if !p.is_ground() || p.negated {
            return None;
        }
        s = unify(l, p, &s)?;
    }
    for (l, a) in neg.iter().zip(&step.absent) {
        if !a.is_ground() || a.negated {
            return None;
        }
        s = unify(&l.atom(), a, &s)?;
    }
    for l in rule.body.iter().filter(|l| l.is_equality()) {
        let g = l.apply(&s);
        if !g.is_ground() || (g.args[0] == g.args[1]) == g.negated {
            return None;
        }
    }
    Some(s)
}
