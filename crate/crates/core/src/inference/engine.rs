use std::collections::{BTreeMap, BTreeSet};

use super::{Answer, EngineConfig, FactSet, InferenceError, ProofStep, ProofTrace, Query, ResolveMode};
use crate::fol::{relation_name, Apply, Literal, Substitution, Symbol, Term};
use crate::logicpad::RuleSet;

/// Base facts plus everything the rules derive from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Saturation {
    pub facts: FactSet,
    pub trace: ProofTrace,
}

impl Saturation {
    pub fn derived(&self) -> impl Iterator<Item = &Literal> {
        self.trace.steps.iter().map(|s| &s.derived)
    }
}

/// Constants that name objects: every constant in `base` except those in the
/// value slot of a function relation (colors, types). Variables that no
/// positive literal binds range over this set.
pub fn object_domain(base: &FactSet, rules: &RuleSet) -> Vec<Term> {
    let values: BTreeSet<Symbol> = rules.functions().iter().map(|f| relation_name(&f.name)).collect();
    let mut out = BTreeSet::new();
    for p in base.predicates() {
        let skip_value = values.contains(p);
        for args in base.tuples(p) {
            for (i, t) in args.iter().enumerate() {
                if skip_value && i == 1 {
                    continue;
                }
                if let Term::Const(c) = t {
                    out.insert(c.clone());
                }
            }
        }
    }
    out.into_iter().map(Term::Const).collect()
}

pub(crate) fn check_declared(rules: &RuleSet, lits: &[Literal]) -> Result<(), InferenceError> {
    for l in lits.iter().filter(|l| !l.is_equality()) {
        let arity = rules
            .arity(&l.predicate)
            .ok_or_else(|| InferenceError::UnknownPredicate(l.predicate.clone()))?;
        if arity != l.arity() {
            return Err(InferenceError::ArityMismatch {
                name: l.predicate.clone(),
                expected: arity,
                found: l.arity(),
            });
        }
    }
    Ok(())
}

/// A conjunctive body split for evaluation: positive atoms are joined in a
/// greedy bound-first order, remaining variables are enumerated over the
/// domain, then equalities and negated atoms are tested.
pub(crate) struct Plan<'a> {
    pos: Vec<&'a Literal>,
    free: Vec<Symbol>,
    tests: Vec<&'a Literal>,
}

impl<'a> Plan<'a> {
    /// `extra` lists variables outside the body (a rule head) that must be
    /// ground in every emitted substitution.
    pub(crate) fn new(body: &'a [Literal], bound: &BTreeSet<Symbol>, extra: &BTreeSet<Symbol>) -> Plan<'a> {
        let mut rest: Vec<&Literal> = body.iter().filter(|l| !l.negated && !l.is_equality()).collect();
        let mut known = bound.clone();
        let mut pos = Vec::with_capacity(rest.len());
        while !rest.is_empty() {
            let score = |l: &Literal| {
                l.args
                    .iter()
                    .filter(|t| match t {
                        Term::Var(v) => known.contains(v),
                        _ => true,
                    })
                    .count()
            };
            let (i, _) = rest
                .iter()
                .enumerate()
                .max_by_key(|(i, l)| (score(l), std::cmp::Reverse(*i)))
                .expect("nonempty");
            let l = rest.remove(i);
            known.extend(l.vars());
            pos.push(l);
        }
        let mut free: BTreeSet<Symbol> = extra.iter().filter(|v| !known.contains(*v)).cloned().collect();
        for l in body {
            free.extend(l.vars().into_iter().filter(|v| !known.contains(v)));
        }
        let mut tests: Vec<&Literal> = body.iter().filter(|l| l.is_equality()).collect();
        tests.extend(body.iter().filter(|l| l.negated && !l.is_equality()));
        Plan {
            pos,
            free: free.into_iter().collect(),
            tests,
        }
    }

    /// Calls `emit` with every substitution extending `s` that satisfies the body.
    pub(crate) fn run<E>(
        &self,
        facts: &FactSet,
        domain: &[Term],
        s: &Substitution,
        emit: &mut dyn FnMut(&Substitution) -> Result<(), E>,
    ) -> Result<(), E> {
        self.join(0, facts, domain, s, emit)
    }

    fn join<E>(
        &self,
        i: usize,
        facts: &FactSet,
        domain: &[Term],
        s: &Substitution,
        emit: &mut dyn FnMut(&Substitution) -> Result<(), E>,
    ) -> Result<(), E> {
        let Some(lit) = self.pos.get(i) else {
            return self.enumerate(0, facts, domain, s.clone(), emit);
        };
        let l = lit.apply(s);
        let mut visit = |tuple: &Vec<Term>| -> Result<(), E> {
            if let Some(next) = match_args(&l.args, tuple, s) {
                self.join(i + 1, facts, domain, &next, emit)?;
            }
            Ok(())
        };
        match l.args.first() {
            Some(first @ Term::Const(_)) => {
                for t in facts.tuples_with_first(&l.predicate, first) {
                    visit(t)?;
                }
            }
            _ => {
                for t in facts.tuples(&l.predicate) {
                    visit(t)?;
                }
            }
        }
        Ok(())
    }

    fn enumerate<E>(
        &self,
        k: usize,
        facts: &FactSet,
        domain: &[Term],
        mut s: Substitution,
        emit: &mut dyn FnMut(&Substitution) -> Result<(), E>,
    ) -> Result<(), E> {
        let Some(v) = self.free.get(k) else {
            return if self.tests.iter().all(|l| holds(l, &s, facts)) {
                emit(&s)
            } else {
                Ok(())
            };
        };
        if s.get(v).is_some() {
            return self.enumerate(k + 1, facts, domain, s, emit);
        }
        for c in domain {
            s.insert(v.clone(), c.clone());
            self.enumerate(k + 1, facts, domain, s.clone(), emit)?;
        }
        Ok(())
    }
}

fn match_args(pattern: &[Term], tuple: &[Term], s: &Substitution) -> Option<Substitution> {
    if pattern.len() != tuple.len() {
        return None;
    }
    let mut out: Option<Substitution> = None;
    for (p, v) in pattern.iter().zip(tuple) {
        match p {
            Term::Var(x) => {
                let cur = out.as_ref().unwrap_or(s);
                match cur.get(x) {
                    Some(b) if b != v => return None,
                    Some(_) => {}
                    None => out.get_or_insert_with(|| s.clone()).insert(x.clone(), v.clone()),
                }
            }
            t => {
                if t != v {
                    return None;
                }
            }
        }
    }
    Some(out.unwrap_or_else(|| s.clone()))
}

/// Truth of a ground test literal: syntactic equality for `=`, absence for
/// negated atoms.
fn holds(l: &Literal, s: &Substitution, facts: &FactSet) -> bool {
    let g = l.apply(s);
    if g.is_equality() {
        return (g.args[0] == g.args[1]) != g.negated;
    }
    debug_assert!(g.negated && g.is_ground());
    !facts.contains_tuple(&g.predicate, &g.args)
}

pub fn saturate(base: &FactSet, rules: &RuleSet) -> Result<Saturation, InferenceError> {
    saturate_with(base, rules, &EngineConfig::default())
}

/// Stratum by stratum, applies every rule to the current facts until nothing
/// new appears. Negated atoms are read against lower strata, which are final.
pub fn saturate_with(base: &FactSet, rules: &RuleSet, cfg: &EngineConfig) -> Result<Saturation, InferenceError> {
    for p in base.predicates() {
        if rules.predicate(p).is_none() {
            return Err(InferenceError::UnknownPredicate(p.clone()));
        }
    }
    for l in base.iter() {
        check_declared(rules, std::slice::from_ref(&l))?;
    }
    let domain = object_domain(base, rules);
    let mut facts = base.clone();
    let mut steps = Vec::new();
    let mut depth: BTreeMap<Literal, usize> = BTreeMap::new();
    let no_bound = BTreeSet::new();

    for k in 1..=rules.max_stratum() {
        let stratum: Vec<_> = rules
            .rules_in_stratum(k)
            .map(|r| (r, Plan::new(&r.body, &no_bound, &r.head.vars())))
            .collect();
        if stratum.is_empty() {
            continue;
        }
        loop {
            let mut fresh: BTreeMap<Literal, (usize, ProofStep)> = BTreeMap::new();
            for (rule, plan) in &stratum {
                plan.run(&facts, &domain, &Substitution::new(), &mut |s| {
                    let head = rule.head.apply(s);
                    if facts.contains(&head) || fresh.contains_key(&head) {
                        return Ok(());
                    }
                    let premises: Vec<Literal> = rule
                        .positive_body()
                        .filter(|l| !l.is_equality())
                        .map(|l| l.apply(s))
                        .collect();
                    let d = 1 + premises.iter().map(|p| depth.get(p).copied().unwrap_or(0)).max().unwrap_or(0);
                    if d > cfg.depth_bound {
                        return Err(InferenceError::DepthExceeded(cfg.depth_bound));
                    }
                    let absent = rule
                        .negative_body()
                        .filter(|l| !l.is_equality())
                        .map(|l| l.atom().apply(s))
                        .collect();
                    let step = ProofStep {
                        derived: head.clone(),
                        rule: rule.name.clone(),
                        premises,
                        absent,
                    };
                    fresh.insert(head, (d, step));
                    Ok(())
                })?;
            }
            if fresh.is_empty() {
                break;
            }
            for (head, (d, step)) in fresh {
                facts.insert_tuple(&head.predicate, head.args.clone());
                depth.insert(head, d);
                steps.push(step);
            }
        }
    }
    Ok(Saturation {
        facts,
        trace: ProofTrace { steps },
    })
}

pub fn resolve(base: &FactSet, rules: &RuleSet, q: &Query) -> Result<Answer, InferenceError> {
    resolve_with(base, rules, q, ResolveMode::Forward, &EngineConfig::default())
}

pub fn resolve_with(
    base: &FactSet,
    rules: &RuleSet,
    q: &Query,
    mode: ResolveMode,
    cfg: &EngineConfig,
) -> Result<Answer, InferenceError> {
    let flat = rules.flatten(&q.conjuncts)?;
    check_declared(rules, &flat)?;
    let user_vars = q.vars();

    let (bindings, trace, support) = match mode {
        ResolveMode::Forward => {
            let sat = saturate_with(base, rules, cfg)?;
            let domain = object_domain(base, rules);
            let plan = Plan::new(&flat, &BTreeSet::new(), &BTreeSet::new());
            let mut found: BTreeSet<Vec<Term>> = BTreeSet::new();
            let mut used: BTreeSet<Literal> = BTreeSet::new();
            plan.run::<InferenceError>(&sat.facts, &domain, &Substitution::new(), &mut |s| {
                found.insert(user_vars.iter().map(|v| s.get(v).cloned().expect("query variable bound")).collect());
                used.extend(flat.iter().filter(|l| !l.negated && !l.is_equality()).map(|l| l.apply(s)));
                Ok(())
            })?;
            let (trace, leaves) = sat.trace.ancestors(used.iter());
            let bindings = found
                .into_iter()
                .map(|vals| user_vars.iter().cloned().zip(vals).collect::<Substitution>())
                .collect::<Vec<_>>();
            (bindings, trace, leaves)
        }
        ResolveMode::Refutation => {
            if !q.is_ground() {
                return Err(InferenceError::NonGroundQuery(q.to_string()));
            }
            let r = super::refute::refute_with(base, rules, &flat, cfg)?;
            let (trace, leaves) = r.trace.ancestors(r.instances.iter());
            let bindings = if r.proven { vec![Substitution::new()] } else { vec![] };
            (bindings, trace, leaves)
        }
    };

    let truth = !bindings.is_empty();
    let support = if truth {
        support
    } else {
        let mut s = BTreeSet::new();
        for c in q.constants() {
            s.extend(base.mentioning(&c));
        }
        s.into_iter().collect()
    };
    Ok(Answer {
        truth,
        bindings,
        trace: if truth { trace } else { ProofTrace::default() },
        support,
    })
}
