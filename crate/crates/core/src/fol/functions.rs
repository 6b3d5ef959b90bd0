use super::{FolError, Literal, Term};

/// Relation symbol that stores the graph of a unary function:
/// `ColOf(vehicle01) = White` is kept as `ColOfRel(vehicle01, White)`.
pub fn relation_name(function: &str) -> String {
    format!("{function}Rel")
}

/// Rewrites function terms into relational literals, introducing fresh
/// variables where a function value has no constant to land on.
///
/// Fresh variables are named `#fN`, which the text syntax cannot produce.
#[derive(Debug, Default)]
pub struct FunctionFlattener {
    next: usize,
}

impl FunctionFlattener {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_fresh(var: &str) -> bool {
        var.starts_with('#')
    }

    fn fresh(&mut self) -> Term {
        let t = Term::Var(format!("#f{}", self.next));
        self.next += 1;
        t
    }

    fn open<'t>(&self, t: &'t Term, is_function: &dyn Fn(&str) -> bool) -> Result<Option<(&'t str, &'t Term)>, FolError> {
        match t {
            Term::App(f, args) => {
                if !is_function(f) {
                    return Err(FolError::UnknownFunction(f.clone()));
                }
                if args.len() != 1 {
                    return Err(FolError::FunctionArity(f.clone()));
                }
                if matches!(args[0], Term::App(..)) {
                    return Err(FolError::NestedFunction(t.to_string()));
                }
                Ok(Some((f.as_str(), &args[0])))
            }
            _ => Ok(None),
        }
    }

    pub fn flatten(&mut self, lits: &[Literal], is_function: &dyn Fn(&str) -> bool) -> Result<Vec<Literal>, FolError> {
        let mut out = Vec::new();
        for lit in lits {
            if lit.is_equality() {
                let (lhs, rhs) = (&lit.args[0], &lit.args[1]);
                match (self.open(lhs, is_function)?, self.open(rhs, is_function)?) {
                    (Some((f, a)), Some((g, b))) => {
                        if lit.negated {
                            let (k1, k2) = (self.fresh(), self.fresh());
                            out.push(Literal::new(relation_name(f), vec![a.clone(), k1.clone()]));
                            out.push(Literal::new(relation_name(g), vec![b.clone(), k2.clone()]));
                            out.push(Literal::equality(k1, k2).negate());
                        } else {
                            let k = self.fresh();
                            out.push(Literal::new(relation_name(f), vec![a.clone(), k.clone()]));
                            out.push(Literal::new(relation_name(g), vec![b.clone(), k]));
                        }
                    }
                    (Some((f, a)), None) | (None, Some((f, a))) => {
                        let value = if matches!(lhs, Term::App(..)) { rhs } else { lhs };
                        let rel = Literal::new(relation_name(f), vec![a.clone(), value.clone()]);
                        out.push(if lit.negated { rel.negate() } else { rel });
                    }
                    (None, None) => out.push(lit.clone()),
                }
                continue;
            }
            let mut args = Vec::with_capacity(lit.args.len());
            for arg in &lit.args {
                match self.open(arg, is_function)? {
                    Some((f, a)) => {
                        let k = self.fresh();
                        out.push(Literal::new(relation_name(f), vec![a.clone(), k.clone()]));
                        args.push(k);
                    }
                    None => args.push(arg.clone()),
                }
            }
            out.push(Literal {
                predicate: lit.predicate.clone(),
                args,
                negated: lit.negated,
            });
        }
        Ok(out)
    }
}

/// One-shot flattening with a fresh counter.
pub fn flatten_functions(lits: &[Literal], is_function: &dyn Fn(&str) -> bool) -> Result<Vec<Literal>, FolError> {
    FunctionFlattener::new().flatten(lits, is_function)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::parse_conjunction;

    fn funcs(name: &str) -> bool {
        name == "ColOf" || name == "TypeOf"
    }

    fn flat(src: &str) -> Vec<String> {
        flatten_functions(&parse_conjunction(src).unwrap(), &funcs)
            .unwrap()
            .iter()
            .map(|l| l.to_string())
            .collect()
    }

    #[test]
    fn equality_with_constant_becomes_relation() {
        assert_eq!(
            flat("TypeOf(x) = Car & !(ColOf(x) = White)"),
            vec!["TypeOfRel(x, Car)", "!ColOfRel(x, White)"]
        );
    }

    #[test]
    fn function_comparison_shares_a_fresh_value() {
        assert_eq!(
            flat("ColOf(vehicle01) = ColOf(vehicle02)"),
            vec!["ColOfRel(vehicle01, ?#f0)", "ColOfRel(vehicle02, ?#f0)"]
        );
    }

    #[test]
    fn unknown_function_is_an_error() {
        let lits = parse_conjunction("SizeOf(x) = Big").unwrap();
        assert_eq!(
            flatten_functions(&lits, &funcs),
            Err(FolError::UnknownFunction("SizeOf".into()))
        );
    }
}
