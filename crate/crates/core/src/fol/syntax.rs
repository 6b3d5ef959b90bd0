//! Text syntax shared by rule files and queries.
//!
//! ```text
//! statement   := ( ("forall" | "exists") var ("," var)* ":" )* implication
//! implication := disjunction ( "->" implication )?
//! disjunction := conjunction ( "|" conjunction )*
//! conjunction := unary ( "&" unary )*
//! unary       := "!" unary | "(" implication ")" | atom
//! atom        := Pred "(" terms ")" | term "=" term
//! term        := var | Const | Func "(" terms ")"
//! ```
//!
//! Variables are single lowercase letters or `?name`; every other identifier
//! is a constant, predicate or function symbol depending on position.

use std::fmt;

use super::{is_bare_var_name, Formula, Literal, Quantifier, Statement, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub position: usize,
    pub expected: Vec<String>,
    pub found: String,
    pub message: Option<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(m) = &self.message {
            return write!(f, "at {}: {m}", self.position);
        }
        write!(f, "at {}: expected ", self.position)?;
        match self.expected.as_slice() {
            [] => write!(f, "nothing")?,
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    QVar(String),
    LParen,
    RParen,
    Comma,
    Colon,
    And,
    Or,
    Not,
    Arrow,
    Eq,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::QVar(s) => format!("`?{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Not => "`!`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '&' => Tok::And,
            '|' => Tok::Or,
            '!' => Tok::Not,
            '=' => Tok::Eq,
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            '?' => {
                let name = ident_at(bytes, i + 1);
                if name.is_empty() {
                    return Err(error_at(i, &["variable name"], "`?`"));
                }
                i += name.len();
                Tok::QVar(name)
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let name = ident_at(bytes, i);
                i += name.len() - 1;
                Tok::Ident(name)
            }
            other => {
                return Err(ParseError {
                    position: i,
                    expected: vec![],
                    found: format!("`{other}`"),
                    message: Some(format!("unexpected character `{other}`")),
                })
            }
        };
        i += 1;
        out.push((tok, Span { start, end: i }));
    }
    out.push((Tok::End, Span { start: src.len(), end: src.len() }));
    Ok(out)
}

fn ident_at(bytes: &[u8], start: usize) -> String {
    bytes[start..]
        .iter()
        .take_while(|b| b.is_ascii_alphanumeric() || **b == b'_')
        .map(|b| *b as char)
        .collect()
}

fn error_at(position: usize, expected: &[&str], found: &str) -> ParseError {
    ParseError {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.to_string(),
        message: None,
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    atom_spans: Vec<Span>,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            atom_spans: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        error_at(self.span().start, expected, &self.peek().describe())
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[label]))
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input", "`&`", "`|`", "`->`"]))
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let mut quantifiers = Vec::new();
        loop {
            let kind = match self.peek() {
                Tok::Ident(k) if k == "forall" => Quantifier::Forall,
                Tok::Ident(k) if k == "exists" => Quantifier::Exists,
                _ => break,
            };
            self.bump();
            loop {
                let v = self.variable()?;
                quantifiers.push((kind, v));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::Colon, "`:`")?;
        }
        let body = self.implication()?;
        self.expect_end()?;
        Ok(Statement {
            quantifiers,
            body,
            atom_spans: std::mem::take(&mut self.atom_spans),
        })
    }

    fn variable(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::QVar(v) => {
                self.bump();
                Ok(v)
            }
            Tok::Ident(v) if is_bare_var_name(&v) => {
                self.bump();
                Ok(v)
            }
            _ => Err(self.unexpected(&["variable"])),
        }
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.conjunction()?];
        while *self.peek() == Tok::Or {
            self.bump();
            parts.push(self.conjunction()?);
        }
        Ok(Formula::or(parts))
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.unary()?];
        while *self.peek() == Tok::And {
            self.bump();
            parts.push(self.unary()?);
        }
        Ok(Formula::and(parts))
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.implication()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Ok(Formula::Atom(self.atom()?)),
        }
    }

    fn atom(&mut self) -> Result<Literal, ParseError> {
        let start = self.span().start;
        let lit = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Ident(name), Tok::LParen) if !is_bare_var_name(&name) => {
                self.bump();
                self.bump();
                let args = self.term_list()?;
                if *self.peek() == Tok::Eq {
                    let lhs = Term::App(name, args);
                    check_depth(&lhs, start)?;
                    self.bump();
                    let rhs = self.term()?;
                    Literal::equality(lhs, rhs)
                } else {
                    Literal::new(name, args)
                }
            }
            (Tok::Ident(_), _) | (Tok::QVar(_), _) => {
                let lhs = self.term()?;
                if *self.peek() != Tok::Eq {
                    return Err(self.unexpected(&["`(`", "`=`"]));
                }
                self.bump();
                let rhs = self.term()?;
                Literal::equality(lhs, rhs)
            }
            _ => return Err(self.unexpected(&["predicate", "term", "`!`", "`(`"])),
        };
        let end = self.toks[self.pos.saturating_sub(1)].1.end;
        self.atom_spans.push(Span { start, end });
        Ok(lit)
    }

    /// Arguments after an opening parenthesis, consuming the closing one.
    fn term_list(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut args = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                    args.push(self.term()?);
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.unexpected(&["`,`", "`)`"])),
            }
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let start = self.span().start;
        match self.peek().clone() {
            Tok::QVar(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Ident(name) if is_bare_var_name(&name) => {
                self.bump();
                Ok(Term::Var(name))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let t = Term::App(name, self.term_list()?);
                    check_depth(&t, start)?;
                    Ok(t)
                } else {
                    Ok(Term::Const(name))
                }
            }
            _ => Err(self.unexpected(&["term"])),
        }
    }
}

fn check_depth(t: &Term, position: usize) -> Result<(), ParseError> {
    if t.function_depth() > 1 {
        return Err(ParseError {
            position,
            expected: vec![],
            found: t.to_string(),
            message: Some(format!("function terms may not be nested: `{t}`")),
        });
    }
    Ok(())
}

/// Parses a closed statement. Open formulas are rejected.
pub fn parse_statement(src: &str) -> Result<Statement, ParseError> {
    let st = Parser::new(src)?.statement()?;
    if let Err(e) = st.check_closed() {
        return Err(ParseError {
            position: 0,
            expected: vec![],
            found: String::new(),
            message: Some(e.to_string()),
        });
    }
    Ok(st)
}

/// Parses a conjunction of (possibly negated) literals; free variables allowed.
pub fn parse_conjunction(src: &str) -> Result<Vec<Literal>, ParseError> {
    let mut p = Parser::new(src)?;
    let f = p.implication()?;
    p.expect_end()?;
    let mut out = Vec::new();
    collect_conjuncts(&f, &mut out).map_err(|msg| ParseError {
        position: 0,
        expected: vec![],
        found: String::new(),
        message: Some(msg),
    })?;
    Ok(out)
}

fn collect_conjuncts(f: &Formula, out: &mut Vec<Literal>) -> Result<(), String> {
    match f {
        Formula::Atom(l) => {
            out.push(l.clone());
            Ok(())
        }
        Formula::And(parts) => parts.iter().try_for_each(|p| collect_conjuncts(p, out)),
        other => Err(format!("expected a conjunction of literals, found `{other}`")),
    }
}

pub fn parse_literal(src: &str) -> Result<Literal, ParseError> {
    let lits = parse_conjunction(src)?;
    match <[Literal; 1]>::try_from(lits) {
        Ok([l]) => Ok(l),
        Err(_) => Err(ParseError {
            position: 0,
            expected: vec!["a single literal".into()],
            found: src.to_string(),
            message: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn squash(s: &str) -> String {
        s.chars().filter(|c| !c.is_whitespace()).collect()
    }

    #[test]
    fn parses_collide_rule() {
        let src = "forall x,y: (DistanceDecreases(x,y) & DistanceDecreasesToZero(x,y)) -> Collide(x,y)";
        let st = parse_statement(src).unwrap();
        assert_eq!(st.quantifiers.len(), 2);
        let Formula::Implies(body, head) = &st.body else {
            panic!("not an implication")
        };
        assert!(matches!(**body, Formula::And(ref parts) if parts.len() == 2));
        assert!(matches!(**head, Formula::Atom(ref l) if l.predicate == "Collide"));
        assert_eq!(squash(&st.to_string()), squash(src));
        assert_eq!(st.atom_spans.len(), 3);
        assert_eq!(&src[st.atom_spans[2].start..st.atom_spans[2].end], "Collide(x,y)");
    }

    #[test]
    fn parses_ground_atom() {
        let st = parse_statement("Vehicle(vehicle01)").unwrap();
        assert!(st.quantifiers.is_empty());
        assert_eq!(st.body, Formula::Atom(Literal::fact("Vehicle", &["vehicle01"])));
    }

    #[test]
    fn dangling_arrow_reports_end_of_input() {
        let src = "forall x: Moves(x) ->";
        let err = parse_statement(src).unwrap_err();
        assert_eq!(err.position, src.len());
        assert_eq!(err.found, "end of input");
        assert!(!err.expected.is_empty());
    }

    #[test]
    fn function_equality_and_negation() {
        let lits = parse_conjunction("(TypeOf(x)=Car) & !(ColOf(x) = White) & ?who = vehicle01").unwrap();
        assert_eq!(lits.len(), 3);
        assert!(lits[0].is_equality() && !lits[0].negated);
        assert!(lits[1].is_equality() && lits[1].negated);
        assert_eq!(lits[2].args[0], Term::var("who"));
    }

    #[test]
    fn nested_functions_rejected() {
        let err = parse_conjunction("ColOf(ColOf(x)) = White").unwrap_err();
        assert!(err.message.unwrap().contains("nested"));
    }

    #[test]
    fn free_variable_rejected_in_statement() {
        assert!(parse_statement("forall x: (Moves(x)) -> Near(x, y)").is_err());
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let arg = prop_oneof![
            prop::sample::select(vec!["x", "y", "who"]).prop_map(Term::var),
            prop::sample::select(vec!["vehicle01", "Car"]).prop_map(Term::constant),
        ];
        let pred = (prop::sample::select(vec!["Moves", "Near"]), prop::collection::vec(arg.clone(), 1..3))
            .prop_map(|(p, args)| Literal::new(p, args));
        let eq = (arg.clone(), arg).prop_map(|(a, b)| Literal::equality(Term::app("ColOf", vec![a]), b));
        let leaf = prop_oneof![pred, eq].prop_map(Formula::Atom);
        leaf.prop_recursive(3, 10, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::and),
                prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::or),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_round_trips(body in arb_formula()) {
            let st = Statement::forall(&["x", "y", "who"], body);
            let text = st.to_string();
            let back = parse_statement(&text).unwrap();
            prop_assert_eq!(back, st);
        }
    }
}
