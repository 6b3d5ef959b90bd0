//! Refutation prover for ground queries.
//!
//! The negated query is a goal clause. Linear resolution against base facts
//! and rule clauses, with the closed-world discharge of negated atoms, either
//! reaches the empty clause (a contradiction, so the query holds) or exhausts
//! every branch. Variables a rule leaves unbound are grounded by a domain
//! guard over the object constants, as in forward chaining.
//!
//! Derived subgoals are grounded before they are expanded, so the ancestor
//! loop check compares ground atoms. Proofs found are memoized. Within one
//! pass every failure is memoized as well, which may miss proofs that run
//! through an atom still in progress; passes repeat until one proves no new
//! atom. Negated atoms are discharged only after such a complete search.

use std::collections::{BTreeMap, BTreeSet};

use super::engine::{check_declared, object_domain};
use super::{EngineConfig, FactSet, InferenceError, ProofStep, ProofTrace};
use crate::fol::{unify, Apply, Literal, Substitution, Symbol, Term};
use crate::logicpad::{RuleDecl, RuleSet};

#[derive(Clone, Debug, PartialEq)]
pub struct Refutation {
    /// Whether the empty clause was derived.
    pub proven: bool,
    /// Derivations used by the refutation, premises before conclusions.
    pub trace: ProofTrace,
    /// Positive goal literals as instantiated by the proof.
    pub instances: Vec<Literal>,
}

#[derive(Clone, Debug)]
enum Goal {
    Lit(Literal),
    Dom(Symbol),
}

type Proof = Vec<ProofStep>;

struct Prover<'a> {
    base: &'a FactSet,
    rules: &'a RuleSet,
    domain: Vec<Term>,
    universe: Vec<Term>,
    bound: usize,
    renames: usize,
    proven: BTreeMap<Literal, Proof>,
    /// Atoms with no proof, established by a complete search.
    refuted: BTreeSet<Literal>,
    /// Atoms that failed during the current pass.
    tentative: BTreeSet<Literal>,
}

pub fn refute(base: &FactSet, rules: &RuleSet, goal: &[Literal]) -> Result<Refutation, InferenceError> {
    refute_with(base, rules, goal, &EngineConfig::default())
}

pub(crate) fn refute_with(
    base: &FactSet,
    rules: &RuleSet,
    goal: &[Literal],
    cfg: &EngineConfig,
) -> Result<Refutation, InferenceError> {
    check_declared(rules, goal)?;
    let mut p = Prover {
        base,
        rules,
        domain: object_domain(base, rules),
        universe: herbrand_universe(base, rules, goal),
        bound: cfg.depth_bound,
        renames: 0,
        proven: BTreeMap::new(),
        refuted: BTreeSet::new(),
        tentative: BTreeSet::new(),
    };
    let goals = order_body(goal, &[], rules);
    let found = loop {
        p.tentative.clear();
        let before = p.proven.len();
        if let Some(r) = p.conjunction(&goals, 0, &Substitution::new(), &mut Vec::new())? {
            break Some(r);
        }
        if p.proven.len() == before {
            break None;
        }
    };
    Ok(match found {
        Some((s, steps)) => {
            let mut seen = BTreeSet::new();
            let steps = steps.into_iter().filter(|st| seen.insert(st.derived.clone())).collect();
            Refutation {
                proven: true,
                trace: ProofTrace { steps },
                instances: goal
                    .iter()
                    .filter(|l| !l.negated && !l.is_equality())
                    .map(|l| l.apply(&s))
                    .collect(),
            }
        }
        None => Refutation {
            proven: false,
            trace: ProofTrace::default(),
            instances: Vec::new(),
        },
    })
}

fn herbrand_universe(base: &FactSet, rules: &RuleSet, goal: &[Literal]) -> Vec<Term> {
    let mut out: BTreeSet<Symbol> = base.constants();
    let rule_lits = rules.rules().iter().flat_map(|r| std::iter::once(&r.head).chain(&r.body));
    for l in rule_lits.chain(goal) {
        out.extend(l.args.iter().filter_map(|t| t.as_const().map(str::to_string)));
    }
    out.into_iter().map(Term::Const).collect()
}

/// Positive atoms (atomic predicates first), then domain guards for variables
/// they leave unbound, then equalities and negated atoms.
fn order_body(body: &[Literal], head_vars: &[Symbol], rules: &RuleSet) -> Vec<Goal> {
    let positive = || body.iter().filter(|l| !l.negated && !l.is_equality());
    let mut out: Vec<Goal> = positive()
        .filter(|l| !rules.is_derived(&l.predicate))
        .chain(positive().filter(|l| rules.is_derived(&l.predicate)))
        .map(|l| Goal::Lit(l.clone()))
        .collect();
    let mut bound = BTreeSet::new();
    for l in positive() {
        bound.extend(l.vars());
    }
    let mut guard = BTreeSet::new();
    for v in head_vars.iter().cloned().chain(body.iter().flat_map(|l| l.vars())) {
        if !bound.contains(&v) {
            guard.insert(v);
        }
    }
    out.extend(guard.into_iter().map(Goal::Dom));
    out.extend(body.iter().filter(|l| l.is_equality()).map(|l| Goal::Lit(l.clone())));
    out.extend(
        body.iter()
            .filter(|l| l.negated && !l.is_equality())
            .map(|l| Goal::Lit(l.clone())),
    );
    out
}

fn rename(rule: &RuleDecl, tag: usize) -> (Literal, Vec<Literal>) {
    let s: Substitution = rule
        .vars()
        .into_iter()
        .map(|v| {
            let renamed = Term::Var(format!("{v}~{tag}"));
            (v, renamed)
        })
        .collect();
    (rule.head.apply(&s), rule.body.iter().map(|l| l.apply(&s)).collect())
}

impl Prover<'_> {
    /// Proof of a ground atom, if it has one.
    fn atom(&mut self, g: &Literal, anc: &mut Vec<Literal>) -> Result<Option<Proof>, InferenceError> {
        if self.base.contains(g) {
            return Ok(Some(Vec::new()));
        }
        if !self.rules.is_derived(&g.predicate) {
            return Ok(None);
        }
        if let Some(p) = self.proven.get(g) {
            return Ok(Some(p.clone()));
        }
        if self.refuted.contains(g) || self.tentative.contains(g) || anc.contains(g) {
            return Ok(None);
        }
        if anc.len() >= self.bound {
            return Err(InferenceError::DepthExceeded(self.bound));
        }
        anc.push(g.clone());
        let mut found = None;
        for rule in self.rules.rules() {
            if rule.head.predicate != g.predicate {
                continue;
            }
            self.renames += 1;
            let (head, body) = rename(rule, self.renames);
            let Some(s) = unify(&head, g, &Substitution::new()) else {
                continue;
            };
            let head_vars: Vec<Symbol> = head.vars().into_iter().collect();
            let goals = order_body(&body, &head_vars, self.rules);
            if let Some((s, mut steps)) = self.conjunction(&goals, 0, &s, anc)? {
                steps.push(ProofStep {
                    derived: g.clone(),
                    rule: rule.name.clone(),
                    premises: body
                        .iter()
                        .filter(|l| !l.negated && !l.is_equality())
                        .map(|l| l.apply(&s))
                        .collect(),
                    absent: body
                        .iter()
                        .filter(|l| l.negated && !l.is_equality())
                        .map(|l| l.atom().apply(&s))
                        .collect(),
                });
                found = Some(steps);
                break;
            }
        }
        anc.pop();
        match &found {
            Some(p) => {
                self.proven.insert(g.clone(), p.clone());
            }
            None => {
                self.tentative.insert(g.clone());
            }
        }
        Ok(found)
    }

    /// Whether a ground atom has a proof, searching until no pass makes progress.
    fn provable(&mut self, g: &Literal) -> Result<bool, InferenceError> {
        let outer = std::mem::take(&mut self.tentative);
        let result = loop {
            self.tentative.clear();
            let before = self.proven.len();
            if self.atom(g, &mut Vec::new())?.is_some() {
                break true;
            }
            if self.proven.len() == before {
                self.refuted.insert(g.clone());
                break false;
            }
        };
        self.tentative = outer;
        Ok(result)
    }

    /// First substitution extending `s` that satisfies `goals[i..]`, with the
    /// derivations it needs.
    fn conjunction(
        &mut self,
        goals: &[Goal],
        i: usize,
        s: &Substitution,
        anc: &mut Vec<Literal>,
    ) -> Result<Option<(Substitution, Proof)>, InferenceError> {
        let Some(goal) = goals.get(i) else {
            return Ok(Some((s.clone(), Vec::new())));
        };
        match goal {
            Goal::Dom(v) => {
                let t = Term::Var(v.clone()).apply(s);
                if t.is_ground() {
                    return if self.domain.contains(&t) {
                        self.conjunction(goals, i + 1, s, anc)
                    } else {
                        Ok(None)
                    };
                }
                for c in self.domain.clone() {
                    let mut s2 = s.clone();
                    s2.insert(v.clone(), c);
                    if let Some(r) = self.conjunction(goals, i + 1, &s2, anc)? {
                        return Ok(Some(r));
                    }
                }
                Ok(None)
            }
            Goal::Lit(l) => {
                let g = l.apply(s);
                if g.is_equality() {
                    let holds = g.is_ground() && (g.args[0] == g.args[1]) != g.negated;
                    return if holds { self.conjunction(goals, i + 1, s, anc) } else { Ok(None) };
                }
                if g.negated {
                    // closed-world discharge; the atom sits in a lower stratum
                    return if self.provable(&g.atom())? {
                        Ok(None)
                    } else {
                        self.conjunction(goals, i + 1, s, anc)
                    };
                }
                if !self.rules.is_derived(&g.predicate) {
                    let tuples: Vec<Vec<Term>> = match g.args.first() {
                        Some(first @ Term::Const(_)) => self.base.tuples_with_first(&g.predicate, first).cloned().collect(),
                        _ => self.base.tuples(&g.predicate).cloned().collect(),
                    };
                    for t in tuples {
                        if let Some(s2) = unify(&g, &Literal::new(g.predicate.clone(), t), s) {
                            if let Some(r) = self.conjunction(goals, i + 1, &s2, anc)? {
                                return Ok(Some(r));
                            }
                        }
                    }
                    return Ok(None);
                }
                let vars: Vec<Symbol> = g.vars().into_iter().collect();
                self.grounded(&g, &vars, 0, goals, i, s, anc)
            }
        }
    }

    /// Tries every grounding of the derived subgoal `g` over the universe.
    #[allow(clippy::too_many_arguments)]
    fn grounded(
        &mut self,
        g: &Literal,
        vars: &[Symbol],
        k: usize,
        goals: &[Goal],
        i: usize,
        s: &Substitution,
        anc: &mut Vec<Literal>,
    ) -> Result<Option<(Substitution, Proof)>, InferenceError> {
        if let Some(v) = vars.get(k) {
            for c in self.universe.clone() {
                let mut s2 = s.clone();
                s2.insert(v.clone(), c);
                if let Some(r) = self.grounded(g, vars, k + 1, goals, i, &s2, anc)? {
                    return Ok(Some(r));
                }
            }
            return Ok(None);
        }
        let Some(mut proof) = self.atom(&g.apply(s), anc)? else {
            return Ok(None);
        };
        match self.conjunction(goals, i + 1, s, anc)? {
            Some((s2, rest)) => {
                proof.extend(rest);
                Ok(Some((s2, proof)))
            }
            None => Ok(None),
        }
    }
}
