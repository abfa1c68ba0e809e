//! One headless session: a synthetic participant runs the plant for an
//! episode with the advisor at hand, then takes the quiz.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, PolicyType, SyntheticUserProfile};
use crate::metrics::{
    attribute_interaction, InteractionTally, QuizAnswer, QuizKind, QuizScore, RuleCatalog,
};
use crate::plant::{apply_action, new_plant, Action, Feature, PlantConfig, PlantEvent, PlantState, NUM_ACTIONS};
use crate::tree::DecisionTreePolicy;
use crate::xai::{Advisor, BinKey, Discretizer, Explanation, Suggestion, UserModel, XaiMode};

pub const SESSION_LOG_SCHEMA: &str = "session-log/v1";

/// Shared, read-only inputs of every session in an experiment.
#[derive(Debug, Clone, Copy)]
pub struct SessionContext<'a> {
    pub tree: &'a DecisionTreePolicy,
    pub catalog: &'a RuleCatalog,
    pub plant: &'a PlantConfig,
    pub profile: &'a SyntheticUserProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema: String,
    pub user_id: String,
    pub mode: XaiMode,
    pub seed: u64,
    pub profile: SyntheticUserProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    /// State before the action.
    pub state: PlantState,
    /// What the participant meant to do before consulting the advisor.
    pub intent: Action,
    pub action: Action,
    /// The participant let the timer run out.
    pub auto_skip: bool,
    pub what: bool,
    pub suggestion: Option<Suggestion>,
    pub why: bool,
    pub explanation: Option<Explanation>,
    pub attributed_feature: Option<Feature>,
    pub learned_rule: Option<String>,
    pub energy: f64,
    pub events: Vec<PlantEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub steps: u32,
    pub final_score: f64,
    pub damaged: bool,
    pub what_count: u32,
    pub why_count: u32,
    pub auto_skips: u32,
    pub interactions: InteractionTally,
    pub learned_rules: Vec<String>,
    pub quiz: Vec<QuizAnswer>,
    pub score: QuizScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub steps: Vec<StepRecord>,
    pub summary: SessionSummary,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineRef<'a> {
    Session(&'a SessionHeader),
    Step(&'a StepRecord),
    Summary(&'a SessionSummary),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Session(SessionHeader),
    Step(StepRecord),
    Summary(SessionSummary),
}

impl SessionLog {
    /// Header line, one line per step, summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: LineRef<'_>| {
            out.push_str(&serde_json::to_string(&line).expect("log line serializes"));
            out.push('\n');
        };
        push(LineRef::Session(&self.header));
        for s in &self.steps {
            push(LineRef::Step(s));
        }
        push(LineRef::Summary(&self.summary));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<SessionLog, HarnessError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut summary = None;
        for (n, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line: Line = serde_json::from_str(raw)
                .map_err(|e| HarnessError::Log(format!("line {}: {e}", n + 1)))?;
            match line {
                Line::Session(h) if header.is_none() && steps.is_empty() => header = Some(h),
                Line::Step(s) if header.is_some() && summary.is_none() => steps.push(s),
                Line::Summary(s) if header.is_some() && summary.is_none() => summary = Some(s),
                _ => return Err(HarnessError::Log(format!("line {}: out of order", n + 1))),
            }
        }
        match (header, summary) {
            (Some(header), Some(summary)) => Ok(SessionLog { header, steps, summary }),
            _ => Err(HarnessError::Log("missing header or summary".into())),
        }
    }
}

/// Independent random streams so both arms of a paired run consume the
/// same draws at the same steps.
struct Streams {
    habit_seed: u64,
    behaviour: ChaCha8Rng,
    learning: ChaCha8Rng,
    quiz: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut root = ChaCha8Rng::seed_from_u64(seed);
        Streams {
            habit_seed: root.random(),
            behaviour: ChaCha8Rng::seed_from_u64(root.random()),
            learning: ChaCha8Rng::seed_from_u64(root.random()),
            quiz: ChaCha8Rng::seed_from_u64(root.random()),
        }
    }
}

/// Per-step behaviour draws, taken in full every step.
struct Draws {
    idle: f64,
    noise: f64,
    random_action: Action,
    what: f64,
    why: f64,
    follow: f64,
}

impl Draws {
    fn take(rng: &mut ChaCha8Rng) -> Self {
        Draws {
            idle: rng.random(),
            noise: rng.random(),
            random_action: Action::ALL[rng.random_range(0..NUM_ACTIONS)],
            what: rng.random(),
            why: rng.random(),
            follow: rng.random(),
        }
    }
}

/// The learner's usual action in a situation: a fixed function of its seed
/// and the discretized state.
pub fn habit_action(habit_seed: u64, bin: &BinKey) -> Action {
    let mut rng = ChaCha8Rng::seed_from_u64(habit_seed ^ u64::from_le_bytes(*bin));
    Action::ALL[rng.random_range(0..NUM_ACTIONS)]
}

pub fn run_session(
    ctx: SessionContext<'_>,
    mode: XaiMode,
    seed: u64,
    user_id: &str,
) -> Result<SessionLog, HarnessError> {
    let SessionContext { tree, catalog, plant, profile } = ctx;
    profile.validate()?;
    let mut rng = Streams::new(seed);
    let discretizer = Discretizer::new(plant, Discretizer::DEFAULT_BINS);
    let mut advisor = Advisor::new(mode, UserModel::new(plant));
    let mut learned: BTreeSet<usize> = BTreeSet::new();
    let mut interactions = InteractionTally::new();
    let mut steps = Vec::new();
    let (mut what_count, mut why_count, mut auto_skips) = (0u32, 0u32, 0u32);

    let mut state = new_plant(plant)?;
    while !state.is_terminal(plant) {
        let d = Draws::take(&mut rng.behaviour);
        let learn_u: f64 = rng.learning.random();
        let pick_u: f64 = rng.learning.random();

        let intent = match profile.policy {
            PolicyType::Random | PolicyType::Imitator => d.random_action,
            PolicyType::ExplanationSensitiveLearner if d.noise < profile.habit_noise => {
                d.random_action
            }
            PolicyType::ExplanationSensitiveLearner => {
                habit_action(rng.habit_seed, &discretizer.bin(&state))
            }
        };
        let idle = d.idle < profile.p_idle;
        let suggestion = (!idle && d.what < profile.ask_what).then(|| advisor.what(tree, &state));
        let explanation = match suggestion {
            Some(_) if d.why < profile.ask_why => Some(advisor.why(tree, &state)?),
            _ => None,
        };

        let mut attributed_feature = None;
        let mut learned_rule = None;
        if let Some(s) = &suggestion {
            what_count += 1;
            why_count += explanation.is_some() as u32;
            let feature = attribute_interaction(Some(s.action), explanation.as_ref())?;
            interactions.record(feature);
            attributed_feature = Some(feature);
            let foil_hit = explanation.as_ref().is_some_and(|e| e.foil == Some(intent));
            let p = profile.acquisition_probability(explanation.is_some(), foil_hit);
            if learn_u < p {
                let open: Vec<usize> = catalog
                    .rules()
                    .iter()
                    .enumerate()
                    .filter(|(i, r)| r.feature == feature && !learned.contains(i))
                    .map(|(i, _)| i)
                    .collect();
                if !open.is_empty() {
                    let i = open[((pick_u * open.len() as f64) as usize).min(open.len() - 1)];
                    learned.insert(i);
                    learned_rule = Some(catalog.rules()[i].id.clone());
                }
            }
        }

        let action = if idle {
            auto_skips += 1;
            Action::Skip
        } else {
            match (profile.policy, &suggestion) {
                (PolicyType::Imitator, Some(s)) => s.action,
                (PolicyType::ExplanationSensitiveLearner, Some(s))
                    if d.follow < profile.follow_probability =>
                {
                    s.action
                }
                _ => intent,
            }
        };
        if !idle {
            advisor.observe(&state, action);
        }

        let outcome = apply_action(&state, action, plant)?;
        steps.push(StepRecord {
            step: state.step_index,
            state,
            intent,
            action,
            auto_skip: idle,
            what: suggestion.is_some(),
            suggestion,
            why: explanation.is_some(),
            explanation,
            attributed_feature,
            learned_rule,
            energy: outcome.energy_produced,
            events: outcome.events,
        });
        state = outcome.next_state;
    }

    let quiz = take_quiz(catalog, &learned, profile.guessing, &mut rng.quiz);
    let score = catalog.score_quiz(&quiz)?;
    Ok(SessionLog {
        header: SessionHeader {
            schema: SESSION_LOG_SCHEMA.to_string(),
            user_id: user_id.to_string(),
            mode,
            seed,
            profile: profile.clone(),
        },
        steps,
        summary: SessionSummary {
            steps: state.step_index,
            final_score: state.energy_total,
            damaged: state.damaged,
            what_count,
            why_count,
            auto_skips,
            interactions,
            learned_rules: learned.iter().map(|&i| catalog.rules()[i].id.clone()).collect(),
            quiz,
            score,
        },
    })
}

/// Known rules are answered correctly; a what-if item is known once any
/// rule about its feature is. Everything else is guessed or left blank.
fn take_quiz(
    catalog: &RuleCatalog,
    learned: &BTreeSet<usize>,
    guessing: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<QuizAnswer> {
    let known_rule: BTreeSet<&str> = learned
        .iter()
        .map(|&i| catalog.rules()[i].quiz_item.as_str())
        .collect();
    let known_feature: BTreeSet<Feature> =
        learned.iter().map(|&i| catalog.rules()[i].feature).collect();
    let mut answers = Vec::new();
    for item in catalog.quiz() {
        let guess = rng.random_range(0..item.options.len());
        let known = match item.kind {
            QuizKind::Rule => known_rule.contains(item.id.as_str()),
            QuizKind::WhatIf => item.feature.is_some_and(|f| known_feature.contains(&f)),
        };
        let choice = if known {
            Some(item.correct)
        } else {
            guessing.then_some(guess)
        };
        if let Some(choice) = choice {
            answers.push(QuizAnswer { item: item.id.clone(), choice });
        }
    }
    answers
}
