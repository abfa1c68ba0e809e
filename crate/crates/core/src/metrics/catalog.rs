//! Machine-readable task rules and the post-task quiz built on them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::plant::{Feature, NUM_FEATURES};

pub const CATALOG_SCHEMA: &str = "rule-catalog/v1";
pub const QUIZ_SHEET_SCHEMA: &str = "quiz-sheet/v1";

const DEFAULT_CATALOG: &str = include_str!("../../data/rule_catalog.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub feature: Feature,
    pub statement: String,
    pub quiz_item: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuizKind {
    /// Checks one catalog rule; counts toward learned rules.
    Rule,
    /// Asks what the advisor would do in a given state; scored separately.
    WhatIf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizItem {
    pub id: String,
    pub kind: QuizKind,
    /// Only what-if items carry their own feature; rule items inherit the rule's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Feature>,
    pub prompt: String,
    pub options: Vec<String>,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizAnswer {
    pub item: String,
    pub choice: usize,
}

/// Quiz as shown to a participant: no correct answers, no rule statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizSheet {
    pub schema: String,
    pub items: Vec<QuizSheetItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizSheetItem {
    pub id: String,
    pub prompt: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CatalogFile {
    schema: String,
    rules: Vec<Rule>,
    quiz: Vec<QuizItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleCatalog {
    rules: Vec<Rule>,
    quiz: Vec<QuizItem>,
    item_index: BTreeMap<String, usize>,
    rule_of_item: BTreeMap<String, usize>,
}

/// Outcome of grading one answer sheet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizScore {
    /// Correctly answered rule items per feature.
    pub learned: Vec<u32>,
    pub rule_items_correct: u32,
    pub what_if_correct: u32,
    pub what_if_total: u32,
}

impl RuleCatalog {
    pub fn default_catalog() -> RuleCatalog {
        RuleCatalog::from_json(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<RuleCatalog, MetricsError> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| MetricsError::Catalog(e.to_string()))?;
        if file.schema != CATALOG_SCHEMA {
            return Err(MetricsError::Catalog(format!(
                "unsupported schema {:?}",
                file.schema
            )));
        }
        RuleCatalog::new(file.rules, file.quiz)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RuleCatalog, MetricsError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| MetricsError::Catalog(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CatalogFile {
            schema: CATALOG_SCHEMA.to_string(),
            rules: self.rules.clone(),
            quiz: self.quiz.clone(),
        })
        .expect("catalog serializes")
    }

    pub fn new(rules: Vec<Rule>, quiz: Vec<QuizItem>) -> Result<RuleCatalog, MetricsError> {
        let err = |m: String| Err(MetricsError::Catalog(m));
        let mut item_index = BTreeMap::new();
        for (i, item) in quiz.iter().enumerate() {
            if item_index.insert(item.id.clone(), i).is_some() {
                return err(format!("duplicate quiz item id {:?}", item.id));
            }
            if item.options.len() < 2 {
                return err(format!("quiz item {:?} needs at least two options", item.id));
            }
            if item.correct >= item.options.len() {
                return err(format!("quiz item {:?}: correct option out of range", item.id));
            }
            if item.kind == QuizKind::WhatIf && item.feature.is_none() {
                return err(format!("what-if item {:?} must name a feature", item.id));
            }
        }
        let mut rule_ids = BTreeSet::new();
        let mut rule_of_item = BTreeMap::new();
        for (r, rule) in rules.iter().enumerate() {
            if !rule_ids.insert(rule.id.clone()) {
                return err(format!("duplicate rule id {:?}", rule.id));
            }
            let Some(&i) = item_index.get(&rule.quiz_item) else {
                return err(format!("rule {:?} points at unknown quiz item {:?}", rule.id, rule.quiz_item));
            };
            if quiz[i].kind != QuizKind::Rule {
                return err(format!("rule {:?} points at a what-if item", rule.id));
            }
            if rule_of_item.insert(rule.quiz_item.clone(), r).is_some() {
                return err(format!("quiz item {:?} is shared by two rules", rule.quiz_item));
            }
        }
        for item in &quiz {
            if item.kind == QuizKind::Rule && !rule_of_item.contains_key(&item.id) {
                return err(format!("rule quiz item {:?} has no rule", item.id));
            }
        }
        let catalog = RuleCatalog {
            rules,
            quiz,
            item_index,
            rule_of_item,
        };
        if let Some(f) = Feature::ALL
            .iter()
            .find(|f| catalog.rule_totals()[f.index()] == 0)
        {
            return err(format!("feature {f} has no rules"));
        }
        Ok(catalog)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn quiz(&self) -> &[QuizItem] {
        &self.quiz
    }

    pub fn num_features(&self) -> usize {
        NUM_FEATURES
    }

    /// Number of rules about each feature, in feature order.
    pub fn rule_totals(&self) -> Vec<u32> {
        let mut totals = vec![0u32; NUM_FEATURES];
        for r in &self.rules {
            totals[r.feature.index()] += 1;
        }
        totals
    }

    pub fn rules_for(&self, feature: Feature) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(move |r| r.feature == feature)
    }

    pub fn item(&self, id: &str) -> Option<&QuizItem> {
        self.item_index.get(id).map(|&i| &self.quiz[i])
    }

    pub fn rule_for_item(&self, id: &str) -> Option<&Rule> {
        self.rule_of_item.get(id).map(|&r| &self.rules[r])
    }

    pub fn what_if_items(&self) -> impl Iterator<Item = &QuizItem> {
        self.quiz.iter().filter(|q| q.kind == QuizKind::WhatIf)
    }

    pub fn quiz_sheet(&self) -> QuizSheet {
        QuizSheet {
            schema: QUIZ_SHEET_SCHEMA.to_string(),
            items: self
                .quiz
                .iter()
                .map(|q| QuizSheetItem {
                    id: q.id.clone(),
                    prompt: q.prompt.clone(),
                    options: q.options.clone(),
                })
                .collect(),
        }
    }

    /// Grade an answer sheet. Unanswered items count as wrong.
    pub fn score_quiz(&self, answers: &[QuizAnswer]) -> Result<QuizScore, MetricsError> {
        let mut seen = BTreeSet::new();
        let mut score = QuizScore {
            learned: vec![0; NUM_FEATURES],
            rule_items_correct: 0,
            what_if_correct: 0,
            what_if_total: self.what_if_items().count() as u32,
        };
        for a in answers {
            let item = self
                .item(&a.item)
                .ok_or_else(|| MetricsError::UnknownQuizItem(a.item.clone()))?;
            if !seen.insert(a.item.as_str()) {
                return Err(MetricsError::DuplicateAnswer(a.item.clone()));
            }
            if a.choice >= item.options.len() {
                return Err(MetricsError::InvalidChoice {
                    item: a.item.clone(),
                    choice: a.choice,
                });
            }
            if a.choice != item.correct {
                continue;
            }
            match item.kind {
                QuizKind::Rule => {
                    let rule = self.rule_for_item(&item.id).expect("validated on load");
                    score.learned[rule.feature.index()] += 1;
                    score.rule_items_correct += 1;
                }
                QuizKind::WhatIf => score.what_if_correct += 1,
            }
        }
        Ok(score)
    }
}

/// Free-function form of [`RuleCatalog::score_quiz`].
pub fn score_quiz(answers: &[QuizAnswer], catalog: &RuleCatalog) -> Result<QuizScore, MetricsError> {
    catalog.score_quiz(answers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_correct(c: &RuleCatalog) -> Vec<QuizAnswer> {
        c.quiz()
            .iter()
            .map(|q| QuizAnswer {
                item: q.id.clone(),
                choice: q.correct,
            })
            .collect()
    }

    #[test]
    fn default_catalog_has_two_rules_per_feature() {
        let c = RuleCatalog::default_catalog();
        assert_eq!(c.rules().len(), 16);
        assert_eq!(c.rule_totals(), vec![2; 8]);
        assert_eq!(c.what_if_items().count(), 4);
    }

    #[test]
    fn all_correct_learns_everything() {
        let c = RuleCatalog::default_catalog();
        let s = c.score_quiz(&all_correct(&c)).unwrap();
        assert_eq!(s.learned, c.rule_totals());
        assert_eq!(s.what_if_correct, 4);
        assert_eq!(s.rule_items_correct, 16);
    }

    #[test]
    fn empty_sheet_scores_zero() {
        let c = RuleCatalog::default_catalog();
        let s = c.score_quiz(&[]).unwrap();
        assert_eq!(s.learned, vec![0; 8]);
        assert_eq!(s.what_if_correct, 0);
    }

    #[test]
    fn per_feature_hand_count() {
        // three water-level items: the two rule items plus a what-if one;
        // only rule items feed the learned count
        let c = RuleCatalog::default_catalog();
        let wrong = |id: &str| {
            let q = c.item(id).unwrap();
            QuizAnswer { item: id.into(), choice: (q.correct + 1) % q.options.len() }
        };
        let right = |id: &str| QuizAnswer { item: id.into(), choice: c.item(id).unwrap().correct };
        let s = c
            .score_quiz(&[right("q-L1"), right("q-L2"), wrong("wi-1"), right("q-T1"), wrong("q-T2")])
            .unwrap();
        assert_eq!(s.learned[Feature::WaterLevel.index()], 2);
        assert_eq!(s.learned[Feature::Temperature.index()], 1);
        assert_eq!(s.what_if_correct, 0);
    }

    #[test]
    fn rejects_unknown_and_duplicate_items() {
        let c = RuleCatalog::default_catalog();
        let a = QuizAnswer { item: "nope".into(), choice: 0 };
        assert_eq!(c.score_quiz(&[a]), Err(MetricsError::UnknownQuizItem("nope".into())));
        let a = QuizAnswer { item: "q-T1".into(), choice: 0 };
        assert_eq!(
            c.score_quiz(&[a.clone(), a]),
            Err(MetricsError::DuplicateAnswer("q-T1".into()))
        );
        let a = QuizAnswer { item: "q-T1".into(), choice: 9 };
        assert!(matches!(c.score_quiz(&[a]), Err(MetricsError::InvalidChoice { .. })));
    }

    #[test]
    fn catalog_validation() {
        let c = RuleCatalog::default_catalog();
        let mut rules = c.rules().to_vec();
        rules.retain(|r| r.feature != Feature::Power);
        let quiz: Vec<_> = c
            .quiz()
            .iter()
            .filter(|q| !q.id.starts_with("q-W"))
            .cloned()
            .collect();
        assert!(RuleCatalog::new(rules, quiz).is_err(), "power has no rules");

        let mut rules = c.rules().to_vec();
        rules[1].quiz_item = rules[0].quiz_item.clone();
        assert!(RuleCatalog::new(rules, c.quiz().to_vec()).is_err());
    }

    #[test]
    fn sheet_hides_answers() {
        let c = RuleCatalog::default_catalog();
        let json = serde_json::to_string(&c.quiz_sheet()).unwrap();
        assert!(!json.contains("correct"));
        assert!(!json.contains("statement"));
        assert_eq!(c.quiz_sheet().items.len(), 20);
        assert_eq!(RuleCatalog::from_json(&c.to_json()).unwrap(), c);
    }
}
