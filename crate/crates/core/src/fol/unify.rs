use super::{Apply, Literal, Substitution, Term};

/// Most general unifier of two literals extending `s`, or `None`.
///
/// Predicate symbol, sign and arity must agree. The occurs check is always on.
/// The returned substitution is idempotent whenever `s` is.
pub fn unify(a: &Literal, b: &Literal, s: &Substitution) -> Option<Substitution> {
    if a.predicate != b.predicate || a.negated != b.negated || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = s.clone();
    for (x, y) in a.args.iter().zip(&b.args) {
        s = unify_terms(x, y, &s)?;
    }
    Some(s)
}

pub fn unify_terms(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let a = resolve(a, s);
    let b = resolve(b, s);
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => Some(s.clone()),
        (Term::Var(x), t) | (t, Term::Var(x)) => bind(x, t, s),
        (Term::Const(x), Term::Const(y)) => (x == y).then(|| s.clone()),
        (Term::App(f, fa), Term::App(g, ga)) => {
            if f != g || fa.len() != ga.len() {
                return None;
            }
            let mut s = s.clone();
            for (x, y) in fa.iter().zip(ga) {
                s = unify_terms(x, y, &s)?;
            }
            Some(s)
        }
        _ => None,
    }
}

/// Applies `s` until no bound variable remains, so non-idempotent inputs still
/// resolve. Terminates because bindings pass the occurs check.
fn resolve(t: &Term, s: &Substitution) -> Term {
    let mut current = t.clone();
    loop {
        let next = current.apply(s);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn bind(var: &str, t: &Term, s: &Substitution) -> Option<Substitution> {
    if t.occurs(var) {
        return None;
    }
    let single: Substitution = [(var.to_string(), t.clone())].into_iter().collect();
    let mut out = Substitution::new();
    for (k, v) in s.iter() {
        out.insert(k.clone(), v.apply(&single));
    }
    out.insert(var.to_string(), t.clone());
    Some(out)
}

/// Composition: applying the result equals applying `first` then `second`.
pub fn compose(first: &Substitution, second: &Substitution) -> Substitution {
    let mut out = Substitution::new();
    for (k, v) in first.iter() {
        out.insert(k.clone(), v.apply(second));
    }
    for (k, v) in second.iter() {
        if first.get(k).is_none() {
            out.insert(k.clone(), v.clone());
        }
    }
    out
}
