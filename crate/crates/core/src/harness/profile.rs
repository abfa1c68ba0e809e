//! Synthetic participants.

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyType {
    /// Picks actions uniformly at random.
    Random,
    /// Does what the advisor suggested when it asked, otherwise random.
    Imitator,
    /// Has a habitual action per situation, sometimes follows suggestions,
    /// and learns faster from explanations that contrast with its habit.
    ExplanationSensitiveLearner,
}

/// Behaviour and learning rates of a synthetic participant.
///
/// Each exchange with the advisor teaches, with some probability, one
/// not-yet-known rule about the feature the exchange concerned: `p_base`
/// for a suggestion alone, `p_explained` once an explanation followed, plus
/// `p_counterfactual_bonus` when the explanation's foil was the action the
/// participant was about to take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticUserProfile {
    pub policy: PolicyType,
    /// Chance of asking *what* in a step.
    pub ask_what: f64,
    /// Chance of following a *what* with a *why*.
    pub ask_why: f64,
    pub p_base: f64,
    pub p_explained: f64,
    pub p_counterfactual_bonus: f64,
    /// Chance of letting the step timer run out (the plant then skips).
    #[serde(default)]
    pub p_idle: f64,
    /// Chance the learner follows a suggestion it received.
    #[serde(default)]
    pub follow_probability: f64,
    /// Chance the learner deviates from its habit at random.
    #[serde(default)]
    pub habit_noise: f64,
    /// Guess unknown quiz items uniformly instead of leaving them blank.
    #[serde(default = "yes")]
    pub guessing: bool,
}

fn yes() -> bool {
    true
}

impl Default for SyntheticUserProfile {
    fn default() -> Self {
        SyntheticUserProfile {
            policy: PolicyType::ExplanationSensitiveLearner,
            ask_what: 0.6,
            ask_why: 0.7,
            p_base: 0.05,
            p_explained: 0.15,
            p_counterfactual_bonus: 0.5,
            p_idle: 0.05,
            follow_probability: 0.3,
            habit_noise: 0.1,
            guessing: true,
        }
    }
}

impl SyntheticUserProfile {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let probs = [
            ("ask_what", self.ask_what),
            ("ask_why", self.ask_why),
            ("p_base", self.p_base),
            ("p_explained", self.p_explained),
            ("p_counterfactual_bonus", self.p_counterfactual_bonus),
            ("p_idle", self.p_idle),
            ("follow_probability", self.follow_probability),
            ("habit_noise", self.habit_noise),
        ];
        for (field, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(HarnessError::InvalidProfile {
                    field,
                    reason: format!("{p} is not a probability"),
                });
            }
        }
        if self.p_explained < self.p_base {
            return Err(HarnessError::InvalidProfile {
                field: "p_explained",
                reason: "must be at least p_base".into(),
            });
        }
        Ok(())
    }

    /// Acquisition probability for one exchange.
    pub fn acquisition_probability(&self, explained: bool, foil_matched_intent: bool) -> f64 {
        match (explained, foil_matched_intent) {
            (false, _) => self.p_base,
            (true, false) => self.p_explained,
            (true, true) => (self.p_explained + self.p_counterfactual_bonus).min(1.0),
        }
    }
}
