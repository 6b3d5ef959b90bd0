//! First-order term language: terms, literals, quantified statements and
//! clauses, plus substitution, unification and clausal normal form.

mod cnf;
mod functions;
mod syntax;
mod unify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use cnf::to_cnf;
pub use functions::{flatten_functions, relation_name, FunctionFlattener};
pub use syntax::{parse_conjunction, parse_literal, parse_statement, ParseError, Span};
pub use unify::{compose, unify, unify_terms};

/// Interned names are plain strings; knowledge bases here are small.
pub type Symbol = String;

/// Reserved binary predicate for equality.
pub const EQUALITY: &str = "=";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum FolError {
    #[error("existential quantifier over `{0}` is not supported in rule position")]
    UnsupportedQuantifier(Symbol),
    #[error("statement is not closed: free variable `{0}`")]
    FreeVariable(Symbol),
    #[error("function terms may not be nested: `{0}`")]
    NestedFunction(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(Symbol),
    #[error("function `{0}` takes exactly one argument")]
    FunctionArity(Symbol),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Const(Symbol),
    Var(Symbol),
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn constant(name: impl Into<Symbol>) -> Self {
        Term::Const(name.into())
    }

    pub fn var(name: impl Into<Symbol>) -> Self {
        Term::Var(name.into())
    }

    pub fn app(functor: impl Into<Symbol>, args: Vec<Term>) -> Self {
        Term::App(functor.into(), args)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Const(_) => true,
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Term::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn occurs(&self, var: &str) -> bool {
        match self {
            Term::Const(_) => false,
            Term::Var(v) => v == var,
            Term::App(_, args) => args.iter().any(|a| a.occurs(var)),
        }
    }

    /// Nesting depth of function applications (0 for constants and variables).
    pub fn function_depth(&self) -> usize {
        match self {
            Term::App(_, args) => 1 + args.iter().map(Term::function_depth).max().unwrap_or(0),
            _ => 0,
        }
    }
}

/// Variables print bare when they are a single lowercase letter, otherwise
/// with the `?` marker so the text re-parses as a variable.
pub(crate) fn is_bare_var_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_ascii_lowercase())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "{c}"),
            Term::Var(v) if is_bare_var_name(v) => write!(f, "{v}"),
            Term::Var(v) => write!(f, "?{v}"),
            Term::App(functor, args) => {
                write!(f, "{functor}(")?;
                write_args(f, args)?;
                write!(f, ")")
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub predicate: Symbol,
    pub args: Vec<Term>,
    pub negated: bool,
}

impl Literal {
    pub fn new(predicate: impl Into<Symbol>, args: Vec<Term>) -> Self {
        Literal {
            predicate: predicate.into(),
            args,
            negated: false,
        }
    }

    /// Ground positive literal over constants, e.g. `Literal::fact("Vehicle", &["vehicle01"])`.
    pub fn fact(predicate: impl Into<Symbol>, args: &[&str]) -> Self {
        Literal::new(predicate, args.iter().map(|a| Term::constant(*a)).collect())
    }

    pub fn equality(lhs: Term, rhs: Term) -> Self {
        Literal::new(EQUALITY, vec![lhs, rhs])
    }

    pub fn negate(&self) -> Self {
        Literal {
            negated: !self.negated,
            ..self.clone()
        }
    }

    /// The literal with its sign stripped.
    pub fn atom(&self) -> Self {
        Literal {
            negated: false,
            ..self.clone()
        }
    }

    pub fn is_equality(&self) -> bool {
        self.predicate == EQUALITY && self.args.len() == 2
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }

    pub fn complementary(&self, other: &Literal) -> bool {
        self.negated != other.negated && self.predicate == other.predicate && self.args == other.args
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_equality() {
            if self.negated {
                write!(f, "!({} = {})", self.args[0], self.args[1])
            } else {
                write!(f, "{} = {}", self.args[0], self.args[1])
            }
        } else {
            if self.negated {
                write!(f, "!")?;
            }
            write!(f, "{}(", self.predicate)?;
            write_args(f, &self.args)?;
            write!(f, ")")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    Forall,
    Exists,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        }
    }
}

/// Boolean formula over literals. `And`/`Or` are n-ary and kept flat.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Atom(Literal),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// Negation that folds into atoms, so `!P(x)` is always an atom.
    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::Atom(l) => Formula::Atom(l.negate()),
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn and(parts: Vec<Formula>) -> Formula {
        Self::flatten(parts, true)
    }

    pub fn or(parts: Vec<Formula>) -> Formula {
        Self::flatten(parts, false)
    }

    pub fn implies(antecedent: Formula, consequent: Formula) -> Formula {
        Formula::Implies(Box::new(antecedent), Box::new(consequent))
    }

    fn flatten(parts: Vec<Formula>, conj: bool) -> Formula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match (p, conj) {
                (Formula::And(inner), true) | (Formula::Or(inner), false) => out.extend(inner),
                (p, _) => out.push(p),
            }
        }
        if out.len() == 1 {
            return out.pop().unwrap();
        }
        if conj {
            Formula::And(out)
        } else {
            Formula::Or(out)
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Formula::Atom(l) => out.extend(l.vars()),
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
            Formula::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn literals(&self) -> Vec<&Literal> {
        let mut out = Vec::new();
        self.visit_literals(&mut |l| out.push(l));
        out
    }

    fn visit_literals<'a>(&'a self, f: &mut dyn FnMut(&'a Literal)) {
        match self {
            Formula::Atom(l) => f(l),
            Formula::Not(g) => g.visit_literals(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit_literals(f)),
            Formula::Implies(a, b) => {
                a.visit_literals(f);
                b.visit_literals(f);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 1,
            Formula::Or(_) => 2,
            Formula::And(_) => 3,
            Formula::Not(_) | Formula::Atom(_) => 4,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(l) => write!(f, "{l}"),
            Formula::Not(inner) => {
                write!(f, "!")?;
                // an atom here would have been folded, so always parenthesize
                write!(f, "({inner})")
            }
            Formula::And(fs) => {
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    g.fmt_child(f, 4)?;
                }
                Ok(())
            }
            Formula::Or(fs) => {
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    g.fmt_child(f, 3)?;
                }
                Ok(())
            }
            Formula::Implies(a, b) => {
                write!(f, "({a}) -> ")?;
                b.fmt_child(f, 1)
            }
        }
    }
}

/// A closed (or ground) quantified formula.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Statement {
    pub quantifiers: Vec<(Quantifier, Symbol)>,
    pub body: Formula,
    /// Byte spans of the atoms in source order, when parsed from text.
    #[serde(skip)]
    pub atom_spans: Vec<Span>,
}

impl PartialEq for Statement {
    fn eq(&self, other: &Self) -> bool {
        self.quantifiers == other.quantifiers && self.body == other.body
    }
}

impl Statement {
    pub fn new(quantifiers: Vec<(Quantifier, Symbol)>, body: Formula) -> Self {
        Statement {
            quantifiers,
            body,
            atom_spans: Vec::new(),
        }
    }

    pub fn forall(vars: &[&str], body: Formula) -> Self {
        Self::new(
            vars.iter().map(|v| (Quantifier::Forall, v.to_string())).collect(),
            body,
        )
    }

    pub fn free_vars(&self) -> BTreeSet<Symbol> {
        let mut vars = BTreeSet::new();
        self.body.collect_vars(&mut vars);
        for (_, v) in &self.quantifiers {
            vars.remove(v);
        }
        vars
    }

    pub fn check_closed(&self) -> Result<(), FolError> {
        match self.free_vars().into_iter().next() {
            Some(v) => Err(FolError::FreeVariable(v)),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut i = 0;
        while i < self.quantifiers.len() {
            let kind = self.quantifiers[i].0;
            write!(f, "{} ", kind.keyword())?;
            let mut first = true;
            while i < self.quantifiers.len() && self.quantifiers[i].0 == kind {
                if !first {
                    write!(f, ",")?;
                }
                write!(f, "{}", Term::Var(self.quantifiers[i].1.clone()))?;
                first = false;
                i += 1;
            }
            write!(f, ": ")?;
        }
        write!(f, "{}", self.body)
    }
}

/// Universally quantified disjunction of literals.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: BTreeSet<Literal>,
}

impl Clause {
    /// Builds a clause, returning `None` for tautologies.
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Option<Clause> {
        let literals: BTreeSet<Literal> = literals.into_iter().collect();
        let tautology = literals
            .iter()
            .filter(|l| l.negated)
            .any(|l| literals.contains(&l.atom()));
        (!tautology).then_some(Clause { literals })
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter()
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Symbol> {
        self.literals.iter().flat_map(|l| l.vars()).collect()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return write!(f, "[]");
        }
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Mapping from variable names to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Substitution(BTreeMap<Symbol, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: impl Into<Symbol>, term: Term) {
        self.0.insert(var.into(), term);
    }

    pub fn remove(&mut self, var: &str) -> Option<Term> {
        self.0.remove(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Term)> {
        self.0.iter()
    }

    /// Keeps only the bindings for the given variables.
    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a Symbol>) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            if let Some(t) = self.0.get(v) {
                out.insert(v.clone(), t.clone());
            }
        }
        out
    }
}

impl FromIterator<(Symbol, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Symbol, Term)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} -> {t}", Term::Var(v.clone()))?;
        }
        write!(f, "}}")
    }
}

/// Single-pass application of a substitution.
pub trait Apply {
    fn apply(&self, s: &Substitution) -> Self;
}

impl Apply for Term {
    fn apply(&self, s: &Substitution) -> Self {
        match self {
            Term::Const(_) => self.clone(),
            Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::App(functor, args) => {
                Term::App(functor.clone(), args.iter().map(|a| a.apply(s)).collect())
            }
        }
    }
}

impl Apply for Literal {
    fn apply(&self, s: &Substitution) -> Self {
        Literal {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| a.apply(s)).collect(),
            negated: self.negated,
        }
    }
}

impl Apply for Clause {
    fn apply(&self, s: &Substitution) -> Self {
        let literals: BTreeSet<Literal> = self.literals.iter().map(|l| l.apply(s)).collect();
        Clause { literals }
    }
}

impl Apply for Formula {
    fn apply(&self, s: &Substitution) -> Self {
        match self {
            Formula::Atom(l) => Formula::Atom(l.apply(s)),
            Formula::Not(f) => Formula::Not(Box::new(f.apply(s))),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.apply(s)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.apply(s)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.apply(s), b.apply(s)),
        }
    }
}

/// Free-function form of [`Apply::apply`].
pub fn apply<T: Apply>(s: &Substitution, t: &T) -> T {
    t.apply(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: &str) -> Term {
        Term::constant(n)
    }
    fn v(n: &str) -> Term {
        Term::var(n)
    }

    #[test]
    fn apply_binds_mapped_variable() {
        let s: Substitution = [("x".to_string(), c("vehicle01"))].into_iter().collect();
        let lit = Literal::new("ConstantSpeed", vec![v("x")]);
        assert_eq!(apply(&s, &lit), Literal::fact("ConstantSpeed", &["vehicle01"]));
    }

    #[test]
    fn apply_empty_substitution_is_identity() {
        let lit = Literal::new("Moves", vec![v("x")]);
        assert_eq!(apply(&Substitution::new(), &lit), lit);
    }

    #[test]
    fn apply_is_single_pass() {
        let s: Substitution = [
            ("x".to_string(), Term::app("f", vec![v("y")])),
            ("y".to_string(), c("a")),
        ]
        .into_iter()
        .collect();
        let lit = Literal::new("P", vec![v("x"), v("y")]);
        let expected = Literal::new("P", vec![Term::app("f", vec![v("y")]), c("a")]);
        assert_eq!(apply(&s, &lit), expected);

        // composition oracle: applying {x -> f(y)} then {y -> a} is a different,
        // two-pass result; single-pass must not match it
        let first: Substitution = [("x".to_string(), Term::app("f", vec![v("y")]))].into_iter().collect();
        let second: Substitution = [("y".to_string(), c("a"))].into_iter().collect();
        let two_pass = apply(&second, &apply(&first, &lit));
        assert_eq!(two_pass, apply(&compose(&first, &second), &lit));
        assert_ne!(two_pass, expected);
    }

    #[test]
    fn clause_drops_tautology_and_duplicates() {
        let p = Literal::new("Moves", vec![v("x")]);
        assert!(Clause::new([p.clone(), p.negate()]).is_none());
        let clause = Clause::new([p.clone(), p.clone()]).unwrap();
        assert_eq!(clause.len(), 1);
    }

    #[test]
    fn display_uses_text_syntax() {
        let eq = Literal::equality(Term::app("TypeOf", vec![v("x")]), c("Car"));
        assert_eq!(eq.to_string(), "TypeOf(x) = Car");
        assert_eq!(eq.negate().to_string(), "!(TypeOf(x) = Car)");
        assert_eq!(Term::var("who").to_string(), "?who");
        let st = Statement::forall(
            &["x"],
            Formula::implies(
                Formula::Atom(Literal::new("Moves", vec![v("x")]).negate()),
                Formula::Atom(Literal::new("Stopped", vec![v("x")])),
            ),
        );
        assert_eq!(st.to_string(), "forall x: (!Moves(x)) -> Stopped(x)");
    }
}
