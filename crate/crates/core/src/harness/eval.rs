//! Accuracy and F1 over yes/no answers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HarnessError, QAItem};
use crate::frontend::QuestionCategory;

/// Confusion counts with "yes" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub total: usize,
    pub correct: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub f1: f64,
}

impl Scores {
    fn add(&mut self, gold: bool, answer: bool) {
        self.total += 1;
        match (gold, answer) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
        self.correct = self.tp + self.tn;
    }

    fn finish(mut self) -> Self {
        self.accuracy = if self.total == 0 { 0.0 } else { self.correct as f64 / self.total as f64 };
        let denom = 2 * self.tp + self.fp + self.fn_;
        // no positives on either side is perfect agreement on the positive class
        self.f1 = if denom == 0 { 1.0 } else { 2.0 * self.tp as f64 / denom as f64 };
        self
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut s = Scores::default();
        for (g, a) in pairs {
            s.add(g, a);
        }
        s.finish()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Scores,
    pub per_category: BTreeMap<QuestionCategory, Scores>,
    /// Where the questions came from.
    pub question_source: String,
    /// Settings the answers were produced with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn evaluate(qa: &[QAItem], answers: &[bool]) -> Result<EvalReport, HarnessError> {
    if qa.len() != answers.len() {
        return Err(HarnessError::LengthMismatch { questions: qa.len(), answers: answers.len() });
    }
    let overall = Scores::from_pairs(qa.iter().zip(answers).map(|(q, a)| (q.gold, *a)));
    let mut per: BTreeMap<QuestionCategory, Vec<(bool, bool)>> = BTreeMap::new();
    for (q, a) in qa.iter().zip(answers) {
        per.entry(q.category).or_default().push((q.gold, *a));
    }
    Ok(EvalReport {
        overall,
        per_category: per.into_iter().map(|(c, v)| (c, Scores::from_pairs(v))).collect(),
        question_source: "generated from scene ground truth".into(),
        config: None,
    })
}

impl EvalReport {
    /// Sums reports over disjoint question sets.
    pub fn merge(reports: &[EvalReport]) -> EvalReport {
        let mut overall = Scores::default();
        let mut per: BTreeMap<QuestionCategory, Scores> = BTreeMap::new();
        let sum = |into: &mut Scores, s: &Scores| {
            into.total += s.total;
            into.tp += s.tp;
            into.fp += s.fp;
            into.fn_ += s.fn_;
            into.tn += s.tn;
            into.correct = into.tp + into.tn;
        };
        for r in reports {
            sum(&mut overall, &r.overall);
            for (c, s) in &r.per_category {
                sum(per.entry(*c).or_default(), s);
            }
        }
        EvalReport {
            overall: overall.finish(),
            per_category: per.into_iter().map(|(c, s)| (c, s.finish())).collect(),
            question_source: reports.first().map(|r| r.question_source.clone()).unwrap_or_default(),
            config: reports.first().and_then(|r| r.config.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
