//! LogicPad: the YAML rule file declaring predicates, functions, derived
//! rules, question vocabulary and sentence templates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fol::{
    relation_name, FolError, Formula, FunctionFlattener, Literal, ParseError, Quantifier, Statement, Symbol, Term,
    EQUALITY,
};

const DEFAULT_FILE: &str = include_str!("default.yaml");

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LogicPadError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown predicate `{name}`")]
    UnknownPredicate { name: Symbol, line: usize },
    #[error("line {line}: `{name}` has arity {expected} but is used with {found} arguments")]
    ArityMismatch { name: Symbol, expected: usize, found: usize, line: usize },
    #[error("line {line}: invalid rule: {message}")]
    InvalidRule { line: usize, message: String },
    #[error("duplicate declaration of `{0}`")]
    Duplicate(Symbol),
    #[error("rules are not stratifiable: negation cycle through {0:?}")]
    NotStratifiable(Vec<Symbol>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateSource {
    Atomic,
    Derived,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateDecl {
    pub name: Symbol,
    pub arity: usize,
    pub source: PredicateSource,
    #[serde(default)]
    pub doc: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDecl {
    pub name: Symbol,
    #[serde(default)]
    pub doc: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vocabulary {
    #[serde(default)]
    pub colors: Vec<Symbol>,
    #[serde(default)]
    pub types: Vec<Symbol>,
    /// Lowercase noun to category predicate.
    #[serde(default)]
    pub categories: BTreeMap<String, Symbol>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub file: String,
    pub line: usize,
}

/// A derived rule `forall ..: body -> head` with the body flattened to
/// relational literals.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleDecl {
    pub name: String,
    pub statement: Statement,
    pub head: Literal,
    pub body: Vec<Literal>,
    pub provenance: Provenance,
}

impl RuleDecl {
    pub fn positive_body(&self) -> impl Iterator<Item = &Literal> {
        self.body.iter().filter(|l| !l.negated)
    }

    pub fn negative_body(&self) -> impl Iterator<Item = &Literal> {
        self.body.iter().filter(|l| l.negated)
    }

    /// All variables of head and body.
    pub fn vars(&self) -> BTreeSet<Symbol> {
        let mut out = self.head.vars();
        for l in &self.body {
            out.extend(l.vars());
        }
        out
    }

    /// Variables that no positive, non-equality body literal binds.
    pub fn unsafe_vars(&self) -> BTreeSet<Symbol> {
        let mut bound = BTreeSet::new();
        for l in self.positive_body().filter(|l| !l.is_equality()) {
            bound.extend(l.vars());
        }
        self.vars().into_iter().filter(|v| !bound.contains(v)).collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<u32>,
    #[serde(default)]
    predicates: Vec<PredicateDecl>,
    #[serde(default)]
    functions: Vec<FunctionDecl>,
    #[serde(default)]
    rules: Option<Vec<RawRule>>,
    #[serde(default)]
    vocabulary: Vocabulary,
    #[serde(default)]
    templates: BTreeMap<Symbol, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    name: String,
    fol: String,
}

/// A loaded, validated and stratified rule file. Immutable once built.
#[derive(Clone, Debug)]
pub struct RuleSet {
    predicates: Vec<PredicateDecl>,
    functions: Vec<FunctionDecl>,
    rules: Vec<RuleDecl>,
    strata: BTreeMap<Symbol, usize>,
    index: BTreeMap<Symbol, usize>,
    vocabulary: Vocabulary,
    templates: BTreeMap<Symbol, String>,
    source: String,
}

impl RuleSet {
    /// Declared predicates, including the implicit `{f}Rel` relation of each function.
    pub fn predicates(&self) -> &[PredicateDecl] {
        &self.predicates
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.index.get(name).map(|&i| &self.predicates[i])
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.predicate(name).map(|p| p.arity)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        name == EQUALITY || self.index.contains_key(name)
    }

    pub fn is_atomic(&self, name: &str) -> bool {
        self.predicate(name).is_some_and(|p| p.source == PredicateSource::Atomic)
    }

    pub fn is_derived(&self, name: &str) -> bool {
        self.predicate(name).is_some_and(|p| p.source == PredicateSource::Derived)
    }

    pub fn functions(&self) -> &[FunctionDecl] {
        &self.functions
    }

    pub fn is_function(&self, name: &str) -> bool {
        self.functions.iter().any(|f| f.name == name)
    }

    pub fn rules(&self) -> &[RuleDecl] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&RuleDecl> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn stratum(&self, predicate: &str) -> usize {
        self.strata.get(predicate).copied().unwrap_or(0)
    }

    pub fn strata(&self) -> &BTreeMap<Symbol, usize> {
        &self.strata
    }

    pub fn max_stratum(&self) -> usize {
        self.strata.values().copied().max().unwrap_or(0)
    }

    /// Rules whose head lives in stratum `k`, in file order.
    pub fn rules_in_stratum(&self, k: usize) -> impl Iterator<Item = &RuleDecl> {
        self.rules.iter().filter(move |r| self.stratum(&r.head.predicate) == k)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn templates(&self) -> &BTreeMap<Symbol, String> {
        &self.templates
    }

    /// The file text the set was loaded from.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Rewrites function terms in `lits` into relation literals.
    pub fn flatten(&self, lits: &[Literal]) -> Result<Vec<Literal>, FolError> {
        FunctionFlattener::new().flatten(lits, &|f| self.is_function(f))
    }

    /// Checks that every literal names a declared predicate with matching arity.
    pub fn check_literals(&self, lits: &[Literal], line: usize) -> Result<(), LogicPadError> {
        for l in lits {
            check_literal(&self.index, &self.predicates, l, line)?;
        }
        Ok(())
    }
}

fn check_literal(
    index: &BTreeMap<Symbol, usize>,
    preds: &[PredicateDecl],
    l: &Literal,
    line: usize,
) -> Result<(), LogicPadError> {
    if l.is_equality() {
        return Ok(());
    }
    let decl = index.get(&l.predicate).map(|&i| &preds[i]).ok_or_else(|| LogicPadError::UnknownPredicate {
        name: l.predicate.clone(),
        line,
    })?;
    if decl.arity != l.arity() {
        return Err(LogicPadError::ArityMismatch {
            name: l.predicate.clone(),
            expected: decl.arity,
            found: l.arity(),
            line,
        });
    }
    Ok(())
}

/// Parses a closed formula in the shared text syntax.
pub fn parse_fol_expr(text: &str) -> Result<Statement, ParseError> {
    crate::fol::parse_statement(text)
}

/// The built-in rule file.
pub fn default_ruleset() -> RuleSet {
    parse_rule_file_named(DEFAULT_FILE, "<default>").expect("bundled rule file is valid")
}

pub fn default_rule_file() -> &'static str {
    DEFAULT_FILE
}

pub fn parse_rule_file(text: &str) -> Result<RuleSet, LogicPadError> {
    parse_rule_file_named(text, "<input>")
}

pub fn parse_rule_file_named(text: &str, file: &str) -> Result<RuleSet, LogicPadError> {
    let raw: RawFile = serde_yaml::from_str(text).map_err(|e| LogicPadError::Parse {
        line: e.location().map_or(0, |l| l.line()),
        message: e.to_string(),
    })?;

    let mut predicates = raw.predicates;
    for f in &raw.functions {
        predicates.push(PredicateDecl {
            name: relation_name(&f.name),
            arity: 2,
            source: PredicateSource::Atomic,
            doc: format!("graph of {}", f.name),
        });
    }
    let mut index = BTreeMap::new();
    for (i, p) in predicates.iter().enumerate() {
        if p.arity == 0 {
            return Err(LogicPadError::Parse {
                line: find_line(text, &p.name, 0),
                message: format!("predicate `{}` must have arity >= 1", p.name),
            });
        }
        if p.name == EQUALITY || index.insert(p.name.clone(), i).is_some() {
            return Err(LogicPadError::Duplicate(p.name.clone()));
        }
    }
    let mut fnames = BTreeSet::new();
    for f in &raw.functions {
        if !fnames.insert(f.name.clone()) {
            return Err(LogicPadError::Duplicate(f.name.clone()));
        }
    }

    let mut rules = Vec::new();
    let mut cursor = 0;
    for r in raw.rules.unwrap_or_default() {
        let line = find_line(text, &r.fol, cursor);
        cursor = line;
        let rule = build_rule(&r, line, file, &fnames)?;
        check_literal(&index, &predicates, &rule.head, line)?;
        for l in &rule.body {
            check_literal(&index, &predicates, l, line)?;
        }
        if predicates[index[&rule.head.predicate]].source != PredicateSource::Derived {
            return Err(LogicPadError::InvalidRule {
                line,
                message: format!("head `{}` is not a derived predicate", rule.head.predicate),
            });
        }
        rules.push(rule);
    }

    for name in raw.templates.keys() {
        if !index.contains_key(name) {
            return Err(LogicPadError::UnknownPredicate {
                name: name.clone(),
                line: find_line(text, &format!("{name}:"), 0),
            });
        }
    }
    for (word, pred) in &raw.vocabulary.categories {
        if !index.contains_key(pred) {
            return Err(LogicPadError::UnknownPredicate {
                name: pred.clone(),
                line: find_line(text, &format!("{word}:"), 0),
            });
        }
    }

    let strata = stratify(&predicates, &rules)?;
    Ok(RuleSet {
        predicates,
        functions: raw.functions,
        rules,
        strata,
        index,
        vocabulary: raw.vocabulary,
        templates: raw.templates,
        source: text.to_string(),
    })
}

/// 1-based line of the first occurrence of `needle` at or after line `from`.
fn find_line(text: &str, needle: &str, from: usize) -> usize {
    text.lines()
        .enumerate()
        .skip(from.saturating_sub(1))
        .find(|(_, l)| l.contains(needle))
        .map_or(0, |(i, _)| i + 1)
}

fn build_rule(r: &RawRule, line: usize, file: &str, functions: &BTreeSet<Symbol>) -> Result<RuleDecl, LogicPadError> {
    let invalid = |message: String| LogicPadError::InvalidRule { line, message };
    let statement = parse_fol_expr(&r.fol).map_err(|e| LogicPadError::Parse {
        line,
        message: e.to_string(),
    })?;
    if let Some((_, v)) = statement.quantifiers.iter().find(|(q, _)| *q == Quantifier::Exists) {
        return Err(invalid(format!("existential quantifier on `{v}` is not allowed in rules")));
    }
    let (antecedent, consequent) = match &statement.body {
        Formula::Implies(a, c) => (a.as_ref(), c.as_ref()),
        _ => return Err(invalid("expected an implication `body -> head`".into())),
    };
    let head = match consequent {
        Formula::Atom(l) if !l.negated && !l.is_equality() => l.clone(),
        other => return Err(invalid(format!("head must be a single positive atom, found `{other}`"))),
    };
    if head.args.iter().any(|t| matches!(t, Term::App(..))) {
        return Err(invalid("function terms are not allowed in a rule head".into()));
    }
    let mut body = Vec::new();
    conjuncts(antecedent, &mut body).map_err(invalid)?;
    let body = FunctionFlattener::new()
        .flatten(&body, &|f| functions.contains(f))
        .map_err(|e| invalid(e.to_string()))?;
    Ok(RuleDecl {
        name: r.name.clone(),
        statement,
        head,
        body,
        provenance: Provenance {
            file: file.to_string(),
            line,
        },
    })
}

fn conjuncts(f: &Formula, out: &mut Vec<Literal>) -> Result<(), String> {
    match f {
        Formula::Atom(l) => {
            out.push(l.clone());
            Ok(())
        }
        Formula::And(parts) => parts.iter().try_for_each(|p| conjuncts(p, out)),
        other => Err(format!("rule body must be a conjunction of literals, found `{other}`")),
    }
}

/// Assigns each predicate the lowest stratum such that positive dependencies
/// sit at or below it and negative dependencies strictly below.
fn stratify(preds: &[PredicateDecl], rules: &[RuleDecl]) -> Result<BTreeMap<Symbol, usize>, LogicPadError> {
    let mut strata: BTreeMap<Symbol, usize> = preds
        .iter()
        .map(|p| (p.name.clone(), usize::from(p.source == PredicateSource::Derived)))
        .collect();
    let limit = preds.len() + 1;
    loop {
        let mut changed = false;
        for r in rules {
            let mut need = strata[&r.head.predicate];
            for l in r.body.iter().filter(|l| !l.is_equality()) {
                let s = strata[&l.predicate] + usize::from(l.negated);
                need = need.max(s);
            }
            if need > limit {
                let cycle = strata
                    .iter()
                    .filter(|(_, &s)| s >= limit)
                    .map(|(p, _)| p.clone())
                    .collect();
                return Err(LogicPadError::NotStratifiable(cycle));
            }
            if need > strata[&r.head.predicate] {
                strata.insert(r.head.predicate.clone(), need);
                changed = true;
            }
        }
        if !changed {
            return Ok(strata);
        }
    }
}
