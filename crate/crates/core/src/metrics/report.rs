//! Per-participant records and the information-power report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    information_power, information_power_user, InteractionTally, MetricsError, QuizAnswer,
    RuleCatalog, WeightVector,
};
use crate::plant::Feature;

pub const IP_REPORT_SCHEMA: &str = "ip-report/v1";

/// Everything measured about one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRecord {
    pub user_id: String,
    /// Correct rule items per feature.
    pub learned: Vec<u32>,
    pub interactions: InteractionTally,
    pub quiz_answers: Vec<QuizAnswer>,
    pub what_if_correct: u32,
    pub what_if_total: u32,
    /// Energy produced during the task.
    pub final_score: f64,
    pub what_count: u32,
    pub why_count: u32,
    /// Likert answers, stored as given.
    #[serde(default)]
    pub questionnaire: BTreeMap<String, i64>,
}

impl LearnerRecord {
    pub fn rules_learned(&self) -> u32 {
        self.learned.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Uniform,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserIp {
    pub user_id: String,
    pub ip: f64,
    pub final_score: f64,
    pub rules_learned: u32,
    pub learned: Vec<u32>,
    pub what_if_correct: u32,
    pub what_if_total: u32,
    pub what_count: u32,
    pub why_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IPReport {
    pub schema: String,
    pub label: String,
    pub a_m: f64,
    pub weight_source: WeightSource,
    pub weights: WeightVector,
    pub n_participants: usize,
    pub ip: f64,
    pub users: Vec<UserIp>,
}

impl IPReport {
    pub fn build(
        label: impl Into<String>,
        a_m: f64,
        weights: WeightVector,
        weight_source: WeightSource,
        records: &[LearnerRecord],
        catalog: &RuleCatalog,
    ) -> Result<IPReport, MetricsError> {
        let totals = catalog.rule_totals();
        let users = records
            .iter()
            .map(|r| {
                Ok(UserIp {
                    user_id: r.user_id.clone(),
                    ip: information_power_user(a_m, &weights, &r.learned, &totals)?,
                    final_score: r.final_score,
                    rules_learned: r.rules_learned(),
                    learned: r.learned.clone(),
                    what_if_correct: r.what_if_correct,
                    what_if_total: r.what_if_total,
                    what_count: r.what_count,
                    why_count: r.why_count,
                })
            })
            .collect::<Result<Vec<_>, MetricsError>>()?;
        let ips: Vec<f64> = users.iter().map(|u| u.ip).collect();
        Ok(IPReport {
            schema: IP_REPORT_SCHEMA.to_string(),
            label: label.into(),
            a_m,
            weight_source,
            weights,
            n_participants: users.len(),
            ip: information_power(&ips)?,
            users,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per participant followed by a `mean` row.
    pub fn to_csv(&self) -> Result<String, MetricsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "label", "user_id", "ip", "final_score", "rules_learned", "what_if_correct",
            "what_if_total", "what", "why",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(Feature::ALL.iter().map(|f| format!("learned_{}", f.key())));
        let csv_err = |e: csv::Error| MetricsError::Csv(e.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for u in &self.users {
            let mut row = vec![
                self.label.clone(),
                u.user_id.clone(),
                u.ip.to_string(),
                u.final_score.to_string(),
                u.rules_learned.to_string(),
                u.what_if_correct.to_string(),
                u.what_if_total.to_string(),
                u.what_count.to_string(),
                u.why_count.to_string(),
            ];
            row.extend(u.learned.iter().map(u32::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        let n = self.users.len().max(1) as f64;
        let mean = |f: &dyn Fn(&UserIp) -> f64| self.users.iter().map(f).sum::<f64>() / n;
        let mut footer = vec![
            self.label.clone(),
            "mean".to_string(),
            self.ip.to_string(),
            mean(&|u| u.final_score).to_string(),
            mean(&|u| u.rules_learned as f64).to_string(),
            mean(&|u| u.what_if_correct as f64).to_string(),
            mean(&|u| u.what_if_total as f64).to_string(),
            mean(&|u| u.what_count as f64).to_string(),
            mean(&|u| u.why_count as f64).to_string(),
        ];
        let k = self.users.first().map_or(0, |u| u.learned.len());
        footer.extend((0..k).map(|j| mean(&|u| u.learned[j] as f64).to_string()));
        w.write_record(&footer).map_err(csv_err)?;
        let bytes = w.into_inner().map_err(|e| MetricsError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::uniform_weights;

    fn record(id: &str, learned: Vec<u32>) -> LearnerRecord {
        LearnerRecord {
            user_id: id.into(),
            learned,
            interactions: InteractionTally::new(),
            quiz_answers: vec![],
            what_if_correct: 1,
            what_if_total: 4,
            final_score: 100.0,
            what_count: 3,
            why_count: 2,
            questionnaire: BTreeMap::new(),
        }
    }

    #[test]
    fn builds_and_renders() {
        let c = RuleCatalog::default_catalog();
        let recs = [record("u0", vec![2; 8]), record("u1", vec![0; 8])];
        let r = IPReport::build("classical", 0.8, uniform_weights(8).unwrap(), WeightSource::Uniform, &recs, &c)
            .unwrap();
        assert!((r.users[0].ip - 0.8).abs() < 1e-12);
        assert_eq!(r.users[1].ip, 0.0);
        assert!((r.ip - 0.4).abs() < 1e-12);
        assert_eq!(r.n_participants, 2);
        let back: IPReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);

        let csv = r.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("label,user_id,ip,"));
        assert!(lines[0].ends_with("learned_regulatory_rods"));
        assert!(lines[3].starts_with("classical,mean,0.4"));
    }

    #[test]
    fn rejects_overcounts_and_empty() {
        let c = RuleCatalog::default_catalog();
        let w = uniform_weights(8).unwrap();
        let bad = [record("u0", vec![3; 8])];
        assert!(IPReport::build("x", 1.0, w.clone(), WeightSource::Uniform, &bad, &c).is_err());
        assert_eq!(
            IPReport::build("x", 1.0, w, WeightSource::Uniform, &[], &c),
            Err(MetricsError::NoUsers)
        );
    }
}
