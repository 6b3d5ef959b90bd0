//! Turns questions into queries: a fixed grammar for the supported yes/no
//! question families, a parser for queries written directly in the FOL text
//! syntax, and a port for an external translator.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::fol::{parse_conjunction, Literal, ParseError, Symbol, Term};
use crate::inference::{Answer, InferenceError, Query};
use crate::logicpad::RuleSet;

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error("no question pattern matches `{0}`")]
    NoPatternMatch(String),
    #[error("unknown word `{0}`")]
    UnknownVocabulary(String),
    #[error("parse error {0}")]
    Parse(#[from] ParseError),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(Symbol),
    #[error("unknown function `{0}`")]
    UnknownFunction(Symbol),
    #[error("`{name}` has arity {expected} but is used with {found} arguments")]
    ArityMismatch { name: Symbol, expected: usize, found: usize },
    #[error(transparent)]
    Query(#[from] InferenceError),
    #[error("translator failed: {0}")]
    Translator(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionCategory {
    /// Object query.
    U1,
    /// Velocity.
    U2,
    /// Change in velocity.
    U3,
    /// Appearance or disappearance.
    U4,
    /// Relative position.
    B1,
    /// Relative distance change.
    B2,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 6] = [
        QuestionCategory::U1,
        QuestionCategory::U2,
        QuestionCategory::U3,
        QuestionCategory::U4,
        QuestionCategory::B1,
        QuestionCategory::B2,
    ];
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Center,
    Right,
}

impl Side {
    pub fn predicate(self) -> &'static str {
        match self {
            Side::Left => "AtLeft",
            Side::Center => "AtCenter",
            Side::Right => "AtRight",
        }
    }

    /// The phrase the grammar accepts after a noun.
    pub fn phrase(self) -> &'static str {
        match self {
            Side::Left => "on the left",
            Side::Center => "at the center",
            Side::Right => "on the right",
        }
    }
}

/// A noun phrase naming an object.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    pub color: Option<Symbol>,
    /// Vehicle type such as `Car`; names the object instead of a category.
    #[serde(rename = "type")]
    pub kind: Option<Symbol>,
    pub category: Option<Symbol>,
    pub position: Option<Side>,
}

impl ObjectDescriptor {
    /// Conjuncts constraining `var`: type, color, category, position.
    pub fn conjuncts(&self, var: &str) -> Vec<Literal> {
        let x = Term::var(var);
        let mut out = Vec::new();
        if let Some(t) = &self.kind {
            out.push(Literal::equality(Term::app("TypeOf", vec![x.clone()]), Term::constant(t.as_str())));
        }
        if let Some(c) = &self.color {
            out.push(Literal::equality(Term::app("ColOf", vec![x.clone()]), Term::constant(c.as_str())));
        }
        if let Some(c) = &self.category {
            out.push(Literal::new(c.as_str(), vec![x.clone()]));
        }
        if let Some(p) = self.position {
            out.push(Literal::new(p.predicate(), vec![x]));
        }
        out
    }

    /// English rendering the grammar parses back, e.g. `white car at the center`.
    pub fn phrase(&self, rules: &RuleSet) -> String {
        let mut words = Vec::new();
        if let Some(c) = &self.color {
            words.push(c.to_lowercase());
        }
        match (&self.kind, &self.category) {
            (Some(t), _) => words.push(t.to_lowercase()),
            (None, Some(c)) => {
                let noun = rules
                    .vocabulary()
                    .categories
                    .iter()
                    .find(|(_, p)| *p == c)
                    .map(|(n, _)| n.clone())
                    .unwrap_or_else(|| c.to_lowercase());
                words.push(noun);
            }
            (None, None) => words.push("object".into()),
        }
        if let Some(p) = self.position {
            words.push(p.phrase().into());
        }
        words.join(" ")
    }
}

#[derive(Clone, Copy, Debug)]
enum Piece {
    Word(&'static str),
    Slot,
}

/// One production: fixed words around one or two descriptor slots, and the
/// predicate applied to the slot variables.
#[derive(Clone, Debug)]
pub struct QuestionPattern {
    pub category: QuestionCategory,
    pub predicate: &'static str,
    template: Vec<Piece>,
}

impl QuestionPattern {
    fn new(category: QuestionCategory, predicate: &'static str, template: &'static str) -> Self {
        let template = template
            .split_whitespace()
            .map(|w| if w == "D" { Piece::Slot } else { Piece::Word(w) })
            .collect();
        QuestionPattern { category, predicate, template }
    }

    pub fn slots(&self) -> usize {
        self.template.iter().filter(|p| matches!(p, Piece::Slot)).count()
    }

    /// The template with `D` for each slot.
    pub fn template(&self) -> String {
        self.template
            .iter()
            .map(|p| match p {
                Piece::Word(w) => *w,
                Piece::Slot => "D",
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// The question grammar. A predicate of `"-"` means the pattern only asks
/// for the existence of the described object.
pub fn patterns() -> Vec<QuestionPattern> {
    use QuestionCategory::*;
    [
        (U1, "-", "is there D"),
        (U1, "-", "are there any D"),
        (U2, "Moves", "is D moving"),
        (U2, "Stopped", "is D stopped"),
        (U2, "ConstantSpeed", "does D move at a constant speed"),
        (U2, "Walk", "is D walking"),
        (U2, "Stand", "is D standing"),
        (U2, "FixedPace", "does D walk at a fixed pace"),
        (U3, "Accelerate", "is D accelerating"),
        (U3, "SpeedUp", "is D speeding up"),
        (U3, "SpeedDown", "is D slowing down"),
        (U3, "IncreasePace", "is D increasing its pace"),
        (U4, "Appears", "does D appear"),
        (U4, "Disappears", "does D disappear"),
        (B1, "On", "is D on D"),
        (B2, "GettingCloser", "is D getting closer to D"),
        (B2, "DistanceIncreases", "is the distance between D and D increasing"),
        (B2, "DistanceDecreases", "is the distance between D and D decreasing"),
        (B2, "Collide", "does D collide with D"),
    ]
    .into_iter()
    .map(|(c, p, t)| QuestionPattern::new(c, p, t))
    .collect()
}

/// A question parsed by the grammar.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedQuestion {
    pub category: QuestionCategory,
    pub objects: Vec<ObjectDescriptor>,
    pub query: Query,
}

fn tokenize(text: &str) -> Vec<String> {
    text.trim()
        .trim_end_matches(['?', '.', '!'])
        .split_whitespace()
        .map(|w| w.trim_matches(',').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn parse_descriptor(tokens: &[String], rules: &RuleSet) -> Result<ObjectDescriptor, FrontendError> {
    let mut toks: &[String] = tokens;
    if let Some(first) = toks.first() {
        if ["the", "a", "an", "any"].contains(&first.as_str()) {
            toks = &toks[1..];
        }
    }
    let mut position = None;
    for side in [Side::Left, Side::Center, Side::Right] {
        let alts: &[&[&str]] = match side {
            Side::Left => &[&["on", "the", "left"], &["at", "the", "left"]],
            Side::Center => &[&["at", "the", "center"], &["in", "the", "center"], &["in", "the", "middle"]],
            Side::Right => &[&["on", "the", "right"], &["at", "the", "right"]],
        };
        for alt in alts {
            if toks.len() > alt.len() && toks[toks.len() - alt.len()..].iter().zip(alt.iter()).all(|(a, b)| a == b) {
                position = Some(side);
                toks = &toks[..toks.len() - alt.len()];
            }
        }
        if position.is_some() {
            break;
        }
    }
    let Some((noun, adjectives)) = toks.split_last() else {
        return Err(FrontendError::NoPatternMatch(tokens.join(" ")));
    };
    let vocab = rules.vocabulary();
    let lookup = |list: &[Symbol], w: &str| list.iter().find(|s| s.to_lowercase() == w).cloned();
    let singular = |w: &str| -> Option<String> {
        let s = w.strip_suffix("es").filter(|s| s.ends_with("s")).or_else(|| w.strip_suffix('s'))?;
        Some(s.to_string())
    };
    let mut d = ObjectDescriptor { color: None, kind: None, category: None, position };
    let noun_forms = std::iter::once(noun.clone()).chain(singular(noun));
    let mut found = false;
    for n in noun_forms {
        if let Some(t) = lookup(&vocab.types, &n) {
            d.kind = Some(t);
        } else if let Some(c) = vocab.categories.get(&n) {
            d.category = Some(c.clone());
        } else {
            continue;
        }
        found = true;
        break;
    }
    if !found {
        return Err(FrontendError::UnknownVocabulary(noun.clone()));
    }
    for a in adjectives {
        match lookup(&vocab.colors, a) {
            Some(c) if d.color.is_none() => d.color = Some(c),
            _ => return Err(FrontendError::UnknownVocabulary(a.clone())),
        }
    }
    Ok(d)
}

/// Matches `pieces` against `toks`, returning the token span of each slot.
fn match_pieces<'a>(pieces: &[Piece], toks: &'a [String], out: &mut Vec<&'a [String]>, sink: &mut dyn FnMut(&[&'a [String]]) -> bool) -> bool {
    match pieces.split_first() {
        None => toks.is_empty() && sink(out),
        Some((Piece::Word(w), rest)) => toks.first().is_some_and(|t| t == w) && match_pieces(rest, &toks[1..], out, sink),
        Some((Piece::Slot, rest)) => {
            for end in 1..=toks.len() {
                out.push(&toks[..end]);
                if match_pieces(rest, &toks[end..], out, sink) {
                    return true;
                }
                out.pop();
            }
            false
        }
    }
}

/// Parses a question of one of the supported families into its query.
pub fn parse_nl_question(text: &str, rules: &RuleSet) -> Result<ParsedQuestion, FrontendError> {
    let toks = tokenize(text);
    let mut first_error = None;
    for pat in patterns() {
        let mut result = None;
        match_pieces(&pat.template, &toks, &mut Vec::new(), &mut |slots| {
            let parsed: Result<Vec<ObjectDescriptor>, FrontendError> =
                slots.iter().map(|s| parse_descriptor(s, rules)).collect();
            match parsed {
                Ok(ds) => {
                    result = Some(ds);
                    true
                }
                Err(e) => {
                    if first_error.is_none() && matches!(e, FrontendError::UnknownVocabulary(_)) {
                        first_error = Some(e);
                    }
                    false
                }
            }
        });
        if let Some(objects) = result {
            let vars = ["x", "y"];
            let mut conjuncts = Vec::new();
            for (d, v) in objects.iter().zip(vars) {
                conjuncts.extend(d.conjuncts(v));
            }
            if pat.predicate != "-" {
                let args = vars[..pat.slots()].iter().map(|v| Term::var(*v)).collect();
                conjuncts.push(Literal::new(pat.predicate, args));
            }
            if conjuncts.is_empty() {
                return Err(FrontendError::NoPatternMatch(text.to_string()));
            }
            let query = Query::new(conjuncts)?;
            check_query(&query, rules)?;
            return Ok(ParsedQuestion { category: pat.category, objects, query });
        }
    }
    Err(first_error.unwrap_or_else(|| FrontendError::NoPatternMatch(text.to_string())))
}

/// Parses a conjunction written in the FOL text syntax.
pub fn parse_fol_query(text: &str, rules: &RuleSet) -> Result<Query, FrontendError> {
    let q = Query::new(parse_conjunction(text)?)?;
    check_query(&q, rules)?;
    Ok(q)
}

fn check_query(q: &Query, rules: &RuleSet) -> Result<(), FrontendError> {
    fn check_term(t: &Term, rules: &RuleSet) -> Result<(), FrontendError> {
        if let Term::App(f, args) = t {
            if !rules.is_function(f) {
                return Err(FrontendError::UnknownFunction(f.clone()));
            }
            if args.len() != 1 {
                return Err(FrontendError::ArityMismatch { name: f.clone(), expected: 1, found: args.len() });
            }
            args.iter().try_for_each(|a| check_term(a, rules))?;
        }
        Ok(())
    }
    for l in &q.conjuncts {
        l.args.iter().try_for_each(|t| check_term(t, rules))?;
        if l.is_equality() {
            continue;
        }
        let Some(arity) = rules.arity(&l.predicate) else {
            return Err(FrontendError::UnknownPredicate(l.predicate.clone()));
        };
        if arity != l.arity() {
            return Err(FrontendError::ArityMismatch { name: l.predicate.clone(), expected: arity, found: l.arity() });
        }
    }
    Ok(())
}

/// External question translator: question text in, FOL query text out.
pub trait TranslatorPort {
    fn translate(&self, question: &str) -> Result<String, String>;
}

impl<F: Fn(&str) -> Result<String, String>> TranslatorPort for F {
    fn translate(&self, question: &str) -> Result<String, String> {
        self(question)
    }
}

/// Runs a command per question, writing the question as one line to its
/// stdin and reading the query from the first line of its stdout.
#[derive(Clone, Debug)]
pub struct ProcessTranslator {
    pub program: String,
    pub args: Vec<String>,
}

impl TranslatorPort for ProcessTranslator {
    fn translate(&self, question: &str) -> Result<String, String> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| format!("{}: {e}", self.program))?;
        {
            let mut stdin = child.stdin.take().ok_or("no stdin")?;
            writeln!(stdin, "{}", question.replace('\n', " ")).map_err(|e| e.to_string())?;
        }
        let mut line = String::new();
        BufReader::new(child.stdout.take().ok_or("no stdout")?)
            .read_line(&mut line)
            .map_err(|e| e.to_string())?;
        let status = child.wait().map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("{} exited with {status}", self.program));
        }
        Ok(line.trim().to_string())
    }
}

/// Grammar first; on `NoPatternMatch` the translator, if any, gets the
/// question and its output must parse as a FOL query.
pub fn parse_question(
    text: &str,
    rules: &RuleSet,
    translator: Option<&dyn TranslatorPort>,
) -> Result<Query, FrontendError> {
    match parse_nl_question(text, rules) {
        Ok(p) => Ok(p.query),
        Err(FrontendError::NoPatternMatch(_)) if translator.is_some() => {
            let fol = translator.unwrap().translate(text).map_err(FrontendError::Translator)?;
            parse_fol_query(&fol, rules)
        }
        Err(e) => Err(e),
    }
}

/// One-line verdict, followed by an evidence line when the answer has a
/// derivation behind it.
pub fn answer_to_text(a: &Answer, q: &Query) -> String {
    if !a.truth {
        return "No.".into();
    }
    let vars = q.vars();
    let witnesses: Vec<String> = a
        .bindings
        .iter()
        .map(|s| {
            let vals: Vec<String> = vars
                .iter()
                .filter_map(|v| s.get(v).map(|t| (v, t)))
                .map(|(v, t)| if vars.len() == 1 { t.to_string() } else { format!("{v}={t}") })
                .collect();
            if vals.len() > 1 {
                format!("({})", vals.join(", "))
            } else {
                vals.join("")
            }
        })
        .filter(|w| !w.is_empty())
        .collect();
    let mut out = match witnesses.len() {
        0 => "Yes.".to_string(),
        1 => format!("Yes — {} satisfies the query.", witnesses[0]),
        _ => format!("Yes — {} satisfy the query.", witnesses.join(", ")),
    };
    if !a.trace.is_empty() {
        let steps: Vec<String> = a.trace.steps.iter().map(|s| s.to_string()).collect();
        out.push_str("\nEvidence: ");
        out.push_str(&steps.join("; "));
    }
    out
}
