//! Information-power metric.
//!
//! For user `i`, `IP_i = a_m * sum_j gamma_j * learned_j / total_j` where
//! `total_j` is the number of catalog rules about feature `j`, `learned_j`
//! how many of them the user got right on the quiz, `gamma` a weight vector
//! summing to one and `a_m` the advisor model's accuracy. The model's
//! information power is the mean of `IP_i` over participants.

mod attribution;
mod catalog;
mod report;

pub use attribution::{attribute_interaction, InteractionTally};
pub use catalog::{
    score_quiz, QuizAnswer, QuizItem, QuizKind, QuizScore, QuizSheet, QuizSheetItem, Rule,
    RuleCatalog, CATALOG_SCHEMA, QUIZ_SHEET_SCHEMA,
};
pub use report::{IPReport, LearnerRecord, UserIp, WeightSource, IP_REPORT_SCHEMA};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of a weight vector's sum from one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("rule catalog: {0}")]
    Catalog(String),
    #[error("unknown quiz item {0:?}")]
    UnknownQuizItem(String),
    #[error("quiz item {0:?} answered twice")]
    DuplicateAnswer(String),
    #[error("quiz item {item:?} has no option {choice}")]
    InvalidChoice { item: String, choice: usize },
    #[error("weight vector must not be empty")]
    EmptyWeights,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("all interaction counts are zero")]
    DegenerateWeights,
    #[error("expected {expected} per-feature values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("feature {feature}: {learned} learned rules exceed the catalog's {total}")]
    CountExceedsTotal { feature: usize, learned: u32, total: u32 },
    #[error("feature {0} has no catalog rules")]
    ZeroTotal(usize),
    #[error("model accuracy {0} outside [0, 1]")]
    AccuracyOutOfRange(f64),
    #[error("per-user IP {0} outside [0, 1]")]
    IpOutOfRange(f64),
    #[error("no participants")]
    NoUsers,
    #[error("interaction has neither a suggestion nor an explained feature")]
    MalformedInteraction,
    #[error("csv: {0}")]
    Csv(String),
}

/// Per-feature informative weights; entries in [0, 1] summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<WeightVector, MetricsError> {
        if weights.is_empty() {
            return Err(MetricsError::EmptyWeights);
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(0.0..=1.0).contains(*w))
        {
            return Err(MetricsError::InvalidWeights(format!(
                "weight {j} = {w} outside [0, 1]"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(MetricsError::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(WeightVector(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        WeightVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// Equal weight `1/k` for each of `k` features.
pub fn uniform_weights(k: usize) -> Result<WeightVector, MetricsError> {
    if k == 0 {
        return Err(MetricsError::EmptyWeights);
    }
    WeightVector::new(vec![1.0 / k as f64; k])
}

/// Weights proportional to how many interactions concerned each feature.
pub fn empirical_weights(counts: &[u64]) -> Result<WeightVector, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::EmptyWeights);
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MetricsError::DegenerateWeights);
    }
    let total = total as f64;
    WeightVector::new(counts.iter().map(|&c| c as f64 / total).collect())
}

/// Information power of the model for one user.
pub fn information_power_user(
    a_m: f64,
    weights: &WeightVector,
    learned: &[u32],
    totals: &[u32],
) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&a_m) {
        return Err(MetricsError::AccuracyOutOfRange(a_m));
    }
    let k = weights.len();
    for len in [learned.len(), totals.len()] {
        if len != k {
            return Err(MetricsError::LengthMismatch { expected: k, found: len });
        }
    }
    let mut acc = 0.0;
    for (j, ((&w, &l), &t)) in weights.as_slice().iter().zip(learned).zip(totals).enumerate() {
        if t == 0 {
            return Err(MetricsError::ZeroTotal(j));
        }
        if l > t {
            return Err(MetricsError::CountExceedsTotal { feature: j, learned: l, total: t });
        }
        acc += w * (l as f64 / t as f64);
    }
    // the weight sum may exceed one by rounding
    Ok((a_m * acc).clamp(0.0, 1.0))
}

/// Information power of the model: mean of the per-user values.
pub fn information_power(per_user: &[f64]) -> Result<f64, MetricsError> {
    if per_user.is_empty() {
        return Err(MetricsError::NoUsers);
    }
    if let Some(&x) = per_user.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(MetricsError::IpOutOfRange(x));
    }
    let mean = per_user.iter().sum::<f64>() / per_user.len() as f64;
    Ok(mean.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_example() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let ip = information_power_user(0.9, &w, &[1, 2], &[2, 4]).unwrap();
        assert!((ip - 0.45).abs() < 1e-12);
    }

    #[test]
    fn bounds_of_the_per_user_value() {
        let w = uniform_weights(8).unwrap();
        let totals = [2u32; 8];
        assert_eq!(information_power_user(1.0, &w, &totals, &totals).unwrap(), 1.0);
        assert_eq!(information_power_user(1.0, &w, &[0; 8], &totals).unwrap(), 0.0);
    }

    #[test]
    fn per_user_errors() {
        let w = uniform_weights(2).unwrap();
        assert!(matches!(
            information_power_user(1.0, &w, &[3, 0], &[2, 2]),
            Err(MetricsError::CountExceedsTotal { feature: 0, .. })
        ));
        assert!(matches!(
            information_power_user(1.0, &w, &[0], &[2, 2]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            information_power_user(1.5, &w, &[0, 0], &[2, 2]),
            Err(MetricsError::AccuracyOutOfRange(_))
        ));
        assert!(matches!(
            information_power_user(1.0, &w, &[0, 0], &[2, 0]),
            Err(MetricsError::ZeroTotal(1))
        ));
    }

    #[test]
    fn aggregate() {
        assert_eq!(information_power(&[0.3]).unwrap(), 0.3);
        assert_eq!(information_power(&[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(information_power(&[]), Err(MetricsError::NoUsers));
        assert!(information_power(&[1.2]).is_err());
    }

    #[test]
    fn uniform() {
        assert_eq!(uniform_weights(8).unwrap().as_slice(), &[0.125; 8]);
        assert_eq!(uniform_weights(1).unwrap().as_slice(), &[1.0]);
        assert_eq!(uniform_weights(0), Err(MetricsError::EmptyWeights));
    }

    #[test]
    fn empirical() {
        assert_eq!(empirical_weights(&[3, 1]).unwrap().as_slice(), &[0.75, 0.25]);
        assert_eq!(empirical_weights(&[4; 8]).unwrap(), uniform_weights(8).unwrap());
        let w = empirical_weights(&[5, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(w.as_slice()[0], 1.0);
        assert_eq!(w.sum(), 1.0);
        assert_eq!(empirical_weights(&[0, 0]), Err(MetricsError::DegenerateWeights));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.5, 1.5]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<WeightVector>("[0.2, 0.2]").is_err());
        let w: WeightVector = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(serde_json::to_string(&w).unwrap(), "[0.25,0.75]");
    }
}
