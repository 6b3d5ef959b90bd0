//! Brute-force stratified model builder and a random knowledge-base
//! generator, used to test the engine differentially.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::object_domain;
use super::{FactSet, InferenceError};
use crate::fol::{Apply, Literal, Substitution, Symbol, Term};
use crate::logicpad::{parse_rule_file, RuleSet};

/// Largest Herbrand base the oracle accepts.
pub const HERBRAND_LIMIT: usize = 10_000;

/// Computes the stratified model by trying every ground instance of every
/// rule until nothing changes. Variables that a positive atom binds range
/// over all constants of the program; the others over the object domain.
pub fn brute_force_models(base: &FactSet, rules: &RuleSet) -> Result<FactSet, InferenceError> {
    let mut universe: BTreeSet<Symbol> = base.constants();
    for r in rules.rules() {
        for l in std::iter::once(&r.head).chain(&r.body) {
            universe.extend(l.args.iter().filter_map(|t| t.as_const().map(str::to_string)));
        }
    }
    let n = universe.len();
    let herbrand: usize = rules
        .predicates()
        .iter()
        .map(|p| n.checked_pow(p.arity as u32).unwrap_or(usize::MAX))
        .fold(0usize, |a, b| a.saturating_add(b));
    if herbrand > HERBRAND_LIMIT {
        return Err(InferenceError::OracleTooLarge(herbrand));
    }
    let universe: Vec<Term> = universe.into_iter().map(Term::Const).collect();
    let domain = object_domain(base, rules);

    let mut model = base.clone();
    for k in 1..=rules.max_stratum() {
        loop {
            let mut new = Vec::new();
            for r in rules.rules_in_stratum(k) {
                let unsafe_vars = r.unsafe_vars();
                let vars: Vec<(Symbol, &[Term])> = r
                    .vars()
                    .into_iter()
                    .map(|v| {
                        let range: &[Term] = if unsafe_vars.contains(&v) { &domain } else { &universe };
                        (v, range)
                    })
                    .collect();
                for_each_assignment(&vars, &mut Substitution::new(), 0, &mut |s| {
                    if r.body.iter().all(|l| ground_holds(&l.apply(s), &model)) {
                        let h = r.head.apply(s);
                        if !model.contains(&h) {
                            new.push(h);
                        }
                    }
                });
            }
            if new.is_empty() {
                break;
            }
            for h in new {
                model.insert(h)?;
            }
        }
    }
    Ok(model)
}

fn for_each_assignment(vars: &[(Symbol, &[Term])], s: &mut Substitution, i: usize, f: &mut dyn FnMut(&Substitution)) {
    let Some((v, range)) = vars.get(i) else {
        f(s);
        return;
    };
    for c in *range {
        s.insert(v.clone(), c.clone());
        for_each_assignment(vars, s, i + 1, f);
    }
    s.remove(v);
}

fn ground_holds(l: &Literal, model: &FactSet) -> bool {
    if l.is_equality() {
        return (l.args[0] == l.args[1]) != l.negated;
    }
    model.contains_tuple(&l.predicate, &l.args) != l.negated
}

#[derive(Clone, Copy, Debug)]
pub struct RandomKbConfig {
    pub max_constants: usize,
    pub max_predicates: usize,
    pub max_rules_per_predicate: usize,
    pub max_body: usize,
    pub max_facts: usize,
}

impl Default for RandomKbConfig {
    fn default() -> Self {
        RandomKbConfig {
            max_constants: 5,
            max_predicates: 6,
            max_rules_per_predicate: 2,
            max_body: 3,
            max_facts: 12,
        }
    }
}

/// A random stratifiable rule file and base, fully determined by `seed`.
/// Returns the rule file text alongside the parsed set.
pub fn random_kb(seed: u64, cfg: &RandomKbConfig) -> (String, RuleSet, FactSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_const = rng.gen_range(1..=cfg.max_constants.max(1));
    let n_pred = rng.gen_range(2..=cfg.max_predicates.max(2));
    let n_atomic = rng.gen_range(1..n_pred);
    let consts: Vec<String> = (0..n_const).map(|i| format!("c{i}")).collect();
    // level 0 is atomic; derived predicates sit on levels 1..=3
    let preds: Vec<(String, usize, usize)> = (0..n_pred)
        .map(|i| {
            let arity = rng.gen_range(1..=2);
            let level = if i < n_atomic { 0 } else { rng.gen_range(1..=3) };
            (format!("P{i}"), arity, level)
        })
        .collect();

    let mut text = String::from("predicates:\n");
    for (i, (name, arity, _)) in preds.iter().enumerate() {
        let source = if i < n_atomic { "atomic" } else { "derived" };
        writeln!(text, "  - {{ name: {name}, arity: {arity}, source: {source} }}").unwrap();
    }
    text.push_str("rules:\n");

    let vars = ["x", "y", "z"];
    let mut rule_no = 0;
    for (head_name, head_arity, level) in preds.iter().skip(n_atomic) {
        for _ in 0..rng.gen_range(1..=cfg.max_rules_per_predicate.max(1)) {
            let arg = |rng: &mut ChaCha8Rng| -> String {
                if rng.gen_bool(0.85) {
                    vars.choose(rng).unwrap().to_string()
                } else {
                    consts.choose(rng).unwrap().clone()
                }
            };
            let mut body = Vec::new();
            let mut used: BTreeSet<String> = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=cfg.max_body.max(1)) {
                let negate = rng.gen_bool(0.3);
                let pool: Vec<&(String, usize, usize)> = preds
                    .iter()
                    .filter(|(_, _, l)| if negate { l < level } else { l <= level })
                    .collect();
                let (p, arity, _) = pool.choose(&mut rng).unwrap();
                let args: Vec<String> = (0..*arity).map(|_| arg(&mut rng)).collect();
                used.extend(args.iter().filter(|a| a.len() == 1).cloned());
                let atom = format!("{p}({})", args.join(", "));
                body.push(if negate { format!("!{atom}") } else { atom });
            }
            let head_args: Vec<String> = (0..*head_arity).map(|_| arg(&mut rng)).collect();
            used.extend(head_args.iter().filter(|a| a.len() == 1).cloned());
            if used.len() >= 2 && rng.gen_bool(0.15) {
                let pick: Vec<&String> = used.iter().collect::<Vec<_>>().choose_multiple(&mut rng, 2).copied().collect();
                let eq = format!("{} = {}", pick[0], pick[1]);
                body.push(if rng.gen_bool(0.7) { format!("!({eq})") } else { eq });
            }
            let quant = if used.is_empty() {
                String::new()
            } else {
                format!("forall {}: ", used.iter().cloned().collect::<Vec<_>>().join(","))
            };
            writeln!(
                text,
                "  - {{ name: r{rule_no}, fol: \"{quant}({}) -> {head_name}({})\" }}",
                body.join(" & "),
                head_args.join(", ")
            )
            .unwrap();
            rule_no += 1;
        }
    }

    let rules = parse_rule_file(&text).unwrap_or_else(|e| panic!("generated rule file invalid: {e}\n{text}"));
    let mut base = FactSet::new(0);
    for _ in 0..rng.gen_range(0..=cfg.max_facts) {
        let (p, arity, _) = &preds[rng.gen_range(0..n_atomic)];
        let args: Vec<&str> = (0..*arity).map(|_| consts.choose(&mut rng).unwrap().as_str()).collect();
        base.insert(Literal::fact(p.as_str(), &args)).expect("ground fact");
    }
    (text, rules, base)
}
