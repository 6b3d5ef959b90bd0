use std::collections::BTreeSet;

use super::{Clause, FolError, Formula, Literal, Quantifier, Statement};

/// Clausal form of a closed, universally quantified statement.
///
/// Implications are rewritten, negation is pushed to the atoms and
/// disjunction is distributed over conjunction. Tautological clauses are
/// dropped and duplicates merged; the result is sorted.
pub fn to_cnf(st: &Statement) -> Result<Vec<Clause>, FolError> {
    if let Some((_, v)) = st.quantifiers.iter().find(|(q, _)| *q == Quantifier::Exists) {
        return Err(FolError::UnsupportedQuantifier(v.clone()));
    }
    st.check_closed()?;
    let nnf = to_nnf(&st.body, false);
    let clauses: BTreeSet<Clause> = distribute(&nnf).into_iter().filter_map(Clause::new).collect();
    Ok(clauses.into_iter().collect())
}

/// Negation normal form without implications. `negate` tracks an odd number
/// of enclosing negations.
fn to_nnf(f: &Formula, negate: bool) -> Formula {
    match f {
        Formula::Atom(l) => Formula::Atom(if negate { l.negate() } else { l.clone() }),
        Formula::Not(inner) => to_nnf(inner, !negate),
        Formula::And(parts) => {
            let parts = parts.iter().map(|p| to_nnf(p, negate)).collect();
            if negate {
                Formula::or(parts)
            } else {
                Formula::and(parts)
            }
        }
        Formula::Or(parts) => {
            let parts = parts.iter().map(|p| to_nnf(p, negate)).collect();
            if negate {
                Formula::and(parts)
            } else {
                Formula::or(parts)
            }
        }
        Formula::Implies(a, b) => {
            // a -> b  ==  !a | b ;  !(a -> b)  ==  a & !b
            if negate {
                Formula::and(vec![to_nnf(a, false), to_nnf(b, true)])
            } else {
                Formula::or(vec![to_nnf(a, true), to_nnf(b, false)])
            }
        }
    }
}

fn distribute(f: &Formula) -> Vec<Vec<Literal>> {
    match f {
        Formula::Atom(l) => vec![vec![l.clone()]],
        Formula::And(parts) => parts.iter().flat_map(distribute).collect(),
        Formula::Or(parts) => {
            let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
            for p in parts {
                let rhs = distribute(p);
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for left in &acc {
                    for right in &rhs {
                        let mut merged = left.clone();
                        merged.extend(right.iter().cloned());
                        next.push(merged);
                    }
                }
                acc = next;
            }
            acc
        }
        Formula::Not(_) | Formula::Implies(..) => unreachable!("input is in negation normal form"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{parse_statement, Apply, Substitution, Term};
    use proptest::prelude::*;

    fn cnf_text(src: &str) -> Vec<String> {
        to_cnf(&parse_statement(src).unwrap())
            .unwrap()
            .iter()
            .map(|c| c.to_string())
            .collect()
    }

    #[test]
    fn implication_becomes_single_clause() {
        assert_eq!(
            cnf_text("forall x,y: (DistanceDecreases(x,y)) -> GettingCloser(x,y)"),
            vec!["!DistanceDecreases(x, y) | GettingCloser(x, y)"]
        );
    }

    #[test]
    fn tautology_is_eliminated() {
        assert!(cnf_text("forall x: (Moves(x)) -> Moves(x)").is_empty());
    }

    #[test]
    fn conjunctive_antecedent() {
        assert_eq!(
            cnf_text("forall x: (Vehicle(x) & SpeedUp(x)) -> Accelerate(x)"),
            vec!["Accelerate(x) | !SpeedUp(x) | !Vehicle(x)"]
        );
    }

    #[test]
    fn existential_rejected() {
        let st = parse_statement("exists x: Vehicle(x)").unwrap();
        assert_eq!(to_cnf(&st), Err(FolError::UnsupportedQuantifier("x".into())));
    }

    // brute-force semantic oracle over a tiny Herbrand base

    const CONSTS: [&str; 2] = ["ka", "kb"];
    const PREDS: [(&str, usize); 3] = [("P", 1), ("Q", 1), ("R", 2)];

    fn ground_atoms() -> Vec<Literal> {
        let mut out = Vec::new();
        for (p, arity) in PREDS {
            if arity == 1 {
                for a in CONSTS {
                    out.push(Literal::fact(p, &[a]));
                }
            } else {
                for a in CONSTS {
                    for b in CONSTS {
                        out.push(Literal::fact(p, &[a, b]));
                    }
                }
            }
        }
        out
    }

    fn holds(l: &Literal, model: &BTreeSet<Literal>) -> bool {
        model.contains(&l.atom()) != l.negated
    }

    fn eval(f: &Formula, s: &Substitution, model: &BTreeSet<Literal>) -> bool {
        match f {
            Formula::Atom(l) => holds(&l.apply(s), model),
            Formula::Not(g) => !eval(g, s, model),
            Formula::And(gs) => gs.iter().all(|g| eval(g, s, model)),
            Formula::Or(gs) => gs.iter().any(|g| eval(g, s, model)),
            Formula::Implies(a, b) => !eval(a, s, model) || eval(b, s, model),
        }
    }

    fn assignments(vars: &[String]) -> Vec<Substitution> {
        let mut out = vec![Substitution::new()];
        for v in vars {
            out = out
                .into_iter()
                .flat_map(|s| {
                    CONSTS.iter().map(move |c| {
                        let mut s = s.clone();
                        s.insert(v.clone(), Term::constant(*c));
                        s
                    })
                })
                .collect();
        }
        out
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let var = prop::sample::select(vec!["x", "y"]);
        let arg = prop_oneof![var.prop_map(Term::var), Just(Term::constant("ka"))];
        let leaf = (0usize..3, arg.clone(), arg).prop_map(|(i, a, b)| {
            let (p, arity) = PREDS[i];
            let args = if arity == 1 { vec![a] } else { vec![a, b] };
            Formula::Atom(Literal::new(p, args))
        });
        leaf.prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::and),
                prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::or),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn cnf_is_equivalent_under_every_interpretation(body in arb_formula()) {
            let st = Statement::forall(&["x", "y"], body);
            let clauses = to_cnf(&st).unwrap();
            let atoms = ground_atoms();
            let vars = vec!["x".to_string(), "y".to_string()];
            let envs = assignments(&vars);
            for mask in 0u32..(1 << atoms.len()) {
                let model: BTreeSet<Literal> = atoms
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, a)| a.clone())
                    .collect();
                let direct = envs.iter().all(|s| eval(&st.body, s, &model));
                let clausal = clauses.iter().all(|c| {
                    let cv: Vec<String> = c.vars().into_iter().collect();
                    assignments(&cv).iter().all(|s| c.apply(s).literals().any(|l| holds(l, &model)))
                });
                prop_assert_eq!(direct, clausal, "mask {}", mask);
            }
        }
    }
}
