//! Fact export as plain sentences and context payloads for a downstream
//! language model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::fol::{Literal, Symbol, Term};
use crate::frontend::answer_to_text;
use crate::inference::{Answer, FactSet, ProofStep, Query};
use crate::logicpad::RuleSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RagError {
    #[error("no template for predicate `{0}`")]
    MissingTemplate(Symbol),
    #[error("template for `{predicate}` has {slots} slots but the predicate has arity {arity}")]
    SlotMismatch { predicate: Symbol, slots: usize, arity: usize },
}

/// Sentence template per predicate, with `{0}`, `{1}` argument slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateTable {
    templates: BTreeMap<Symbol, String>,
}

fn slot_count(template: &str) -> usize {
    let mut slots = BTreeSet::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                if let Ok(i) = after[..close].parse::<usize>() {
                    slots.insert(i);
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    slots.len()
}

impl TemplateTable {
    pub fn new(templates: BTreeMap<Symbol, String>) -> Self {
        TemplateTable { templates }
    }

    /// The table shipped in the rule file.
    pub fn from_rules(rules: &RuleSet) -> Self {
        TemplateTable::new(rules.templates().clone())
    }

    pub fn get(&self, predicate: &str) -> Option<&str> {
        self.templates.get(predicate).map(String::as_str)
    }

    /// Every declared predicate has a template whose slots match its arity.
    pub fn check(&self, rules: &RuleSet) -> Result<(), RagError> {
        for p in rules.predicates() {
            let t = self.get(&p.name).ok_or_else(|| RagError::MissingTemplate(p.name.clone()))?;
            let slots = slot_count(t);
            if slots != p.arity {
                return Err(RagError::SlotMismatch { predicate: p.name.clone(), slots, arity: p.arity });
            }
        }
        Ok(())
    }

    pub fn render(&self, fact: &Literal) -> Result<String, RagError> {
        let t = self.get(&fact.predicate).ok_or_else(|| RagError::MissingTemplate(fact.predicate.clone()))?;
        let mut out = t.to_string();
        for (i, a) in fact.args.iter().enumerate() {
            out = out.replace(&format!("{{{i}}}"), &a.to_string());
        }
        if fact.negated {
            out = format!("it is not the case that {}", out.trim_end_matches('.'));
            out.push('.');
        }
        Ok(out)
    }
}

fn sorted(facts: impl IntoIterator<Item = Literal>) -> Vec<Literal> {
    let mut v: Vec<Literal> = facts.into_iter().collect();
    v.sort_by(|a, b| {
        let key = |l: &Literal| (l.predicate.clone(), l.args.iter().map(Term::to_string).collect::<Vec<_>>());
        key(a).cmp(&key(b))
    });
    v.dedup();
    v
}

/// One sentence per fact, ordered by predicate and then arguments.
pub fn export_templates(facts: &FactSet, tbl: &TemplateTable) -> Result<Vec<String>, RagError> {
    sorted(facts.iter()).iter().map(|f| tbl.render(f)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// All window facts as sentences.
    FactsOnly,
    /// Verdict, derivation and the base facts it rests on.
    WithInference,
}

impl std::str::FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "facts_only" | "facts-only" | "c3" => Ok(ContextMode::FactsOnly),
            "with_inference" | "with-inference" | "c2" => Ok(ContextMode::WithInference),
            other => Err(format!("unknown context mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPayload {
    pub question: String,
    pub mode: ContextMode,
    /// Verdict line followed by one line per derivation step.
    pub verdict: Vec<String>,
    /// Fact sentences: every fact, or only the support of the verdict.
    pub sentences: Vec<String>,
}

fn render_step(step: &ProofStep, tbl: &TemplateTable) -> Result<String, RagError> {
    let head = tbl.render(&step.derived)?;
    let mut because: Vec<String> = Vec::new();
    for p in &step.premises {
        because.push(tbl.render(p)?.trim_end_matches('.').to_string());
    }
    for a in &step.absent {
        because.push(tbl.render(&a.negate())?.trim_end_matches('.').to_string());
    }
    if because.is_empty() {
        Ok(format!("{head} (rule {})", step.rule))
    } else {
        Ok(format!("{} because {} (rule {}).", head.trim_end_matches('.'), because.join(", and "), step.rule))
    }
}

/// Builds the retrieval block for `question`. In `WithInference` mode `a`
/// must be the answer to `q` over `facts`.
pub fn build_context(
    question: &str,
    q: &Query,
    a: &Answer,
    facts: &FactSet,
    mode: ContextMode,
    tbl: &TemplateTable,
) -> Result<ContextPayload, RagError> {
    let (verdict, sentences) = match mode {
        ContextMode::FactsOnly => (Vec::new(), export_templates(facts, tbl)?),
        ContextMode::WithInference => {
            let text = answer_to_text(a, q);
            let mut verdict = vec![text.lines().next().unwrap_or_default().to_string()];
            for s in &a.trace.steps {
                verdict.push(render_step(s, tbl)?);
            }
            let support = sorted(a.support.iter().filter(|l| facts.contains(l)).cloned());
            let sentences = support.iter().map(|f| tbl.render(f)).collect::<Result<_, _>>()?;
            (verdict, sentences)
        }
    };
    Ok(ContextPayload { question: question.to_string(), mode, verdict, sentences })
}

impl ContextPayload {
    /// The retrieved block without the question header.
    pub fn retrieved(&self) -> String {
        let mut out = String::new();
        match self.mode {
            ContextMode::FactsOnly => section(&mut out, "FACTS", &self.sentences),
            ContextMode::WithInference => {
                section(&mut out, "VERDICT", &self.verdict);
                section(&mut out, "SUPPORT", &self.sentences);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        format!("QUESTION\n{}\n\n{}", self.question, self.retrieved())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("payload serializes")
    }
}

fn section(out: &mut String, name: &str, lines: &[String]) {
    if !out.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "{name}");
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::parse_conjunction;
    use crate::frontend::parse_nl_question;
    use crate::inference::resolve;
    use crate::logicpad::default_ruleset;
    use proptest::prelude::*;

    fn facts(src: &str) -> FactSet {
        let lits = if src.trim().is_empty() { vec![] } else { parse_conjunction(src).unwrap() };
        FactSet::from_literals(0, lits).unwrap()
    }

    fn table() -> TemplateTable {
        TemplateTable::from_rules(&default_ruleset())
    }

    fn figure_three() -> FactSet {
        facts(
            "Vehicle(vehicle01) & TypeOfRel(vehicle01, Car) & ColOfRel(vehicle01, White) & AtCenter(vehicle01) & Moves(vehicle01) \
             & Vehicle(vehicle02) & TypeOfRel(vehicle02, Car) & ColOfRel(vehicle02, Black) & AtCenter(vehicle02) & Moves(vehicle02) & SpeedUp(vehicle02) \
             & Pedestrian(pedestrian01) & AtLeft(pedestrian01)",
        )
    }

    #[test]
    fn bundled_table_is_complete() {
        table().check(&default_ruleset()).unwrap();
    }

    #[test]
    fn check_reports_gaps() {
        let rs = default_ruleset();
        let mut m = rs.templates().clone();
        m.remove("Moves");
        assert_eq!(TemplateTable::new(m.clone()).check(&rs), Err(RagError::MissingTemplate("Moves".into())));
        m.insert("Moves".into(), "{0} moves near {1}.".into());
        assert!(matches!(TemplateTable::new(m).check(&rs), Err(RagError::SlotMismatch { slots: 2, arity: 1, .. })));
    }

    #[test]
    fn export_examples() {
        let s = export_templates(&facts("Moves(vehicle01) & Vehicle(vehicle01)"), &table()).unwrap();
        assert_eq!(s, vec!["vehicle01 is moving.", "vehicle01 is a vehicle."]);
        assert!(export_templates(&FactSet::new(0), &table()).unwrap().is_empty());
        let mut m = BTreeMap::new();
        m.insert("Vehicle".to_string(), "{0} is a vehicle.".to_string());
        let err = export_templates(&facts("Vehicle(vehicle01) & Moves(vehicle01)"), &TemplateTable::new(m)).unwrap_err();
        assert_eq!(err, RagError::MissingTemplate("Moves".into()));
    }

    #[test]
    fn binary_templates() {
        let s = export_templates(&facts("On(pedestrian01, sidewalk01) & ColOfRel(vehicle01, White)"), &table()).unwrap();
        assert_eq!(s, vec!["the color of vehicle01 is White.", "pedestrian01 is on sidewalk01."]);
    }

    #[test]
    fn figure_query_with_inference() {
        let rs = default_ruleset();
        let base = figure_three();
        let question = "Does the white car at the center move at a constant speed?";
        let q = parse_nl_question(question, &rs).unwrap().query;
        let a = resolve(&base, &rs, &q).unwrap();
        let p = build_context(question, &q, &a, &base, ContextMode::WithInference, &table()).unwrap();
        assert_eq!(p.verdict[0], "Yes — vehicle01 satisfies the query.");
        assert!(p.verdict[1..].iter().any(|l| l.starts_with("vehicle01 moves at a constant speed because vehicle01 is a vehicle")));
        assert!(p.sentences.contains(&"vehicle01 is a vehicle.".to_string()));
        assert!(!p.sentences.iter().any(|s| s.contains("vehicle02")));
        let all = export_templates(&base, &table()).unwrap();
        assert!(p.sentences.iter().all(|s| all.contains(s)));
        let text = p.to_text();
        let v = text.find("VERDICT").unwrap();
        let s = text.find("SUPPORT").unwrap();
        assert!(v < s && !text.contains("FACTS"));
    }

    #[test]
    fn facts_only_is_the_export() {
        let rs = default_ruleset();
        let base = figure_three();
        let q = parse_nl_question("Is there a pedestrian?", &rs).unwrap().query;
        let a = resolve(&base, &rs, &q).unwrap();
        let p = build_context("Is there a pedestrian?", &q, &a, &base, ContextMode::FactsOnly, &table()).unwrap();
        assert_eq!(p.sentences, export_templates(&base, &table()).unwrap());
        assert!(p.verdict.is_empty());
        assert!(p.retrieved().starts_with("FACTS\n"));
    }

    #[test]
    fn false_answer_support_is_the_queried_objects() {
        let rs = default_ruleset();
        let base = figure_three();
        let q = Query::new(parse_conjunction("SpeedUp(vehicle01)").unwrap()).unwrap();
        let a = resolve(&base, &rs, &q).unwrap();
        let p = build_context("", &q, &a, &base, ContextMode::WithInference, &table()).unwrap();
        assert_eq!(p.verdict, vec!["No."]);
        assert!(p.sentences.iter().all(|s| s.contains("vehicle01")));
        assert_eq!(p.sentences.len(), 5);
    }

    #[test]
    fn json_round_trip() {
        let rs = default_ruleset();
        let base = figure_three();
        let q = parse_nl_question("Is the black car speeding up?", &rs).unwrap().query;
        let a = resolve(&base, &rs, &q).unwrap();
        let p = build_context("Is the black car speeding up?", &q, &a, &base, ContextMode::WithInference, &table()).unwrap();
        let back: ContextPayload = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    fn arb_facts() -> impl Strategy<Value = Vec<Literal>> {
        let names = prop::sample::select(vec!["vehicle01", "vehicle02", "pedestrian01", "road01"]);
        let unary = prop::sample::select(vec!["Vehicle", "Pedestrian", "Moves", "SpeedUp", "AtLeft", "Road", "Appears"]);
        let binary = prop::sample::select(vec!["On", "DistanceDecreases", "DistanceIncreases"]);
        let one = (unary, names.clone()).prop_map(|(p, a)| Literal::fact(p, &[a]));
        let two = (binary, names.clone(), names).prop_map(|(p, a, b)| Literal::fact(p, &[a, b]));
        prop::collection::vec(prop_oneof![one, two], 0..20)
    }

    proptest! {
        #[test]
        fn one_sentence_per_fact(lits in arb_facts()) {
            let fs = FactSet::from_literals(0, lits).unwrap();
            let s = export_templates(&fs, &table()).unwrap();
            prop_assert_eq!(s.len(), fs.len());
            let distinct: BTreeSet<&String> = s.iter().collect();
            prop_assert_eq!(distinct.len(), fs.len());
            prop_assert_eq!(export_templates(&fs, &table()).unwrap(), s);
        }

        #[test]
        fn c2_support_is_a_subset(lits in arb_facts(), pick in 0usize..4) {
            let rs = default_ruleset();
            let fs = FactSet::from_literals(0, lits).unwrap();
            let queries = ["Vehicle(x) & Stopped(x)", "Pedestrian(x) & Walk(x)", "GettingCloser(x, y)", "Vehicle(x) & Accelerate(x)"];
            let q = Query::new(parse_conjunction(queries[pick]).unwrap()).unwrap();
            let a = resolve(&fs, &rs, &q).unwrap();
            let all = export_templates(&fs, &table()).unwrap();
            let p = build_context("q", &q, &a, &fs, ContextMode::WithInference, &table()).unwrap();
            prop_assert!(p.sentences.iter().all(|s| all.contains(s)));
            let again = build_context("q", &q, &a, &fs, ContextMode::WithInference, &table()).unwrap();
            prop_assert_eq!(p.to_text(), again.to_text());
        }
    }
}
