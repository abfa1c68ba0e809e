//! Mapping advisor exchanges onto the feature they taught.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::plant::{Action, Feature, NUM_FEATURES};
use crate::xai::Explanation;

/// Feature an exchange concerns. A what-only exchange counts toward the
/// feature the suggested action affects; an exchange that went on to a why
/// counts toward the feature the explanation cited. An explanation without
/// a condition (single-leaf tree) falls back to the suggestion.
pub fn attribute_interaction(
    suggestion: Option<Action>,
    explanation: Option<&Explanation>,
) -> Result<Feature, MetricsError> {
    if let Some(f) = explanation.and_then(|e| e.feature) {
        return Ok(f);
    }
    suggestion
        .map(Action::primary_feature)
        .ok_or(MetricsError::MalformedInteraction)
}

/// Interaction counts per feature.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InteractionTally([u64; NUM_FEATURES]);

impl InteractionTally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, feature: Feature) {
        self.0[feature.index()] += 1;
    }

    pub fn merge(&mut self, other: &InteractionTally) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }

    pub fn counts(&self) -> &[u64; NUM_FEATURES] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}
