//! Per-session state machine. Pure and synchronous: the owner feeds it
//! commands one at a time and persists the journal entries it returns.

use std::collections::BTreeMap;
use std::sync::Arc;

use infopower_core::metrics::{
    attribute_interaction, information_power_user, uniform_weights, InteractionTally,
    QuizAnswer, QuizScore, QuizSheet, RuleCatalog,
};
use infopower_core::plant::{
    apply_action, new_plant, Action, PlantConfig, PlantEvent, PlantState, NUM_FEATURES,
};
use infopower_core::tree::{DecisionTreePolicy, NodeId};
use infopower_core::xai::{Advisor, Explanation, Suggestion, UserModel, XaiMode};
use serde::{Deserialize, Serialize};

use crate::protocol::{
    ErrorCode, ExplanationView, Phase, ProtocolError, Report, ServerMessage, StateUpdate,
    StepReport, SuggestionView, EXPLANATION_SCHEMA, REPORT_SCHEMA, STATE_UPDATE_SCHEMA,
    SUGGESTION_SCHEMA,
};

/// State-changing inputs. Reads (state, quiz sheet, report) are not commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    Start,
    Act {
        action: Action,
    },
    AskWhat,
    AskWhy,
    /// The timer of `step` ran out.
    Expire {
        step: u32,
    },
    SubmitQuiz {
        answers: Vec<QuizAnswer>,
        #[serde(default)]
        questionnaire: BTreeMap<String, i64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Started,
    Stepped {
        action: Action,
        auto_skip: bool,
        energy: f64,
        events: Vec<PlantEvent>,
        state: PlantState,
        phase: Phase,
    },
    Suggested {
        action: Action,
        leaf: NodeId,
        text: String,
    },
    Explained {
        explanation: Explanation,
    },
    QuizScored {
        score: QuizScore,
    },
    Rejected {
        code: ErrorCode,
        message: String,
    },
}

/// One journal line: a command, the step it arrived in, and its effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub step: u32,
    pub command: Command,
    pub outcome: Outcome,
}

/// Result of feeding one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Handled {
    /// None for a timer that fired after its step had already ended.
    pub entry: Option<JournalEntry>,
    pub reply: Result<ServerMessage, ProtocolError>,
    /// Set when a new step began and needs a timer.
    pub step_started: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    mode: XaiMode,
    plant: PlantConfig,
    tree: Arc<DecisionTreePolicy>,
    catalog: Arc<RuleCatalog>,
    phase: Phase,
    state: PlantState,
    advisor: Advisor,
    suggestion: Option<Suggestion>,
    explanation: Option<Explanation>,
    last_step: Option<StepReport>,
    interactions: InteractionTally,
    what_count: u32,
    why_count: u32,
    auto_skips: u32,
    rejections: u32,
    quiz: Option<QuizScore>,
    questionnaire: BTreeMap<String, i64>,
    seq: u64,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        mode: XaiMode,
        plant: PlantConfig,
        tree: Arc<DecisionTreePolicy>,
        catalog: Arc<RuleCatalog>,
    ) -> Result<Session, ProtocolError> {
        let state = new_plant(&plant)
            .map_err(|e| ProtocolError::new(ErrorCode::BadRequest, e.to_string()))?;
        Ok(Session {
            id: id.into(),
            mode,
            advisor: Advisor::new(mode, UserModel::new(&plant)),
            plant,
            tree,
            catalog,
            phase: Phase::Briefing,
            state,
            suggestion: None,
            explanation: None,
            last_step: None,
            interactions: InteractionTally::new(),
            what_count: 0,
            why_count: 0,
            auto_skips: 0,
            rejections: 0,
            quiz: None,
            questionnaire: BTreeMap::new(),
            seq: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> XaiMode {
        self.mode
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn plant_state(&self) -> &PlantState {
        &self.state
    }

    pub fn plant_config(&self) -> &PlantConfig {
        &self.plant
    }

    pub fn step(&self) -> u32 {
        self.state.step_index
    }

    pub fn handle(&mut self, command: Command) -> Handled {
        let step = self.state.step_index;
        if let Command::Expire { step: s } = command {
            if self.phase != Phase::Running || s != step {
                return Handled {
                    entry: None,
                    reply: Ok(ServerMessage::State(self.state_update())),
                    step_started: None,
                };
            }
        }
        let (outcome, reply, step_started) = match self.apply(&command) {
            Ok((outcome, reply, started)) => (outcome, Ok(reply), started),
            Err(e) => {
                self.rejections += 1;
                let outcome = Outcome::Rejected { code: e.code, message: e.message.clone() };
                (outcome, Err(e), None)
            }
        };
        self.seq += 1;
        Handled {
            entry: Some(JournalEntry { seq: self.seq, step, command, outcome }),
            reply,
            step_started,
        }
    }

    fn wrong_phase(&self, what: &str) -> ProtocolError {
        ProtocolError::new(
            ErrorCode::WrongPhase,
            format!("{what} is not allowed in phase {:?}", self.phase),
        )
    }

    fn require(&self, phase: Phase, what: &str) -> Result<(), ProtocolError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(self.wrong_phase(what))
        }
    }

    fn apply(
        &mut self,
        command: &Command,
    ) -> Result<(Outcome, ServerMessage, Option<u32>), ProtocolError> {
        match command {
            Command::Start => {
                self.require(Phase::Briefing, "start")?;
                self.phase = Phase::Running;
                let reply = ServerMessage::State(self.state_update());
                Ok((Outcome::Started, reply, Some(self.state.step_index)))
            }
            Command::Act { action } => {
                self.require(Phase::Running, "an action")?;
                self.step_with(*action, false)
            }
            Command::Expire { .. } => self.step_with(Action::Skip, true),
            Command::AskWhat => {
                self.require(Phase::Running, "a what question")?;
                if self.suggestion.is_some() {
                    return Err(ProtocolError::new(
                        ErrorCode::DuplicateQuestion,
                        "what was already asked in this step",
                    ));
                }
                let s = self.advisor.what(&self.tree, &self.state);
                self.what_count += 1;
                let view = SuggestionView {
                    schema: SUGGESTION_SCHEMA.into(),
                    step: self.state.step_index,
                    action: s.action,
                    text: s.text(),
                };
                let outcome = Outcome::Suggested { action: s.action, leaf: s.leaf, text: view.text.clone() };
                self.suggestion = Some(s);
                Ok((outcome, ServerMessage::Suggestion(view), None))
            }
            Command::AskWhy => {
                self.require(Phase::Running, "a why question")?;
                if self.suggestion.is_none() {
                    return Err(ProtocolError::new(
                        ErrorCode::WhyBeforeWhat,
                        "ask what the advisor would do before asking why",
                    ));
                }
                if self.explanation.is_some() {
                    return Err(ProtocolError::new(
                        ErrorCode::DuplicateQuestion,
                        "why was already asked in this step",
                    ));
                }
                let e = self
                    .advisor
                    .why(&self.tree, &self.state)
                    .map_err(|e| ProtocolError::new(ErrorCode::Internal, e.to_string()))?;
                self.why_count += 1;
                let view = ExplanationView {
                    schema: EXPLANATION_SCHEMA.into(),
                    step: self.state.step_index,
                    text: e.text.clone(),
                };
                self.explanation = Some(e.clone());
                Ok((Outcome::Explained { explanation: e }, ServerMessage::Explanation(view), None))
            }
            Command::SubmitQuiz { answers, questionnaire } => {
                self.require(Phase::Quiz, "the quiz")?;
                let score = self
                    .catalog
                    .score_quiz(answers)
                    .map_err(|e| ProtocolError::new(ErrorCode::InvalidAnswer, e.to_string()))?;
                self.quiz = Some(score.clone());
                self.questionnaire = questionnaire.clone();
                self.phase = Phase::Done;
                let reply = ServerMessage::Report(self.build_report());
                Ok((Outcome::QuizScored { score }, reply, None))
            }
        }
    }

    fn step_with(
        &mut self,
        action: Action,
        auto_skip: bool,
    ) -> Result<(Outcome, ServerMessage, Option<u32>), ProtocolError> {
        if let Some(s) = &self.suggestion {
            let feature = attribute_interaction(Some(s.action), self.explanation.as_ref())
                .map_err(|e| ProtocolError::new(ErrorCode::Internal, e.to_string()))?;
            self.interactions.record(feature);
        }
        if auto_skip {
            self.auto_skips += 1;
        } else {
            self.advisor.observe(&self.state, action);
        }
        let outcome = apply_action(&self.state, action, &self.plant)
            .map_err(|e| ProtocolError::new(ErrorCode::Internal, e.to_string()))?;
        self.last_step = Some(StepReport {
            step: self.state.step_index,
            action,
            auto_skip,
            energy: outcome.energy_produced,
            events: outcome.events.clone(),
        });
        self.state = outcome.next_state;
        self.suggestion = None;
        self.explanation = None;
        let started = if self.state.is_terminal(&self.plant) {
            self.phase = Phase::Quiz;
            None
        } else {
            Some(self.state.step_index)
        };
        let entry = Outcome::Stepped {
            action,
            auto_skip,
            energy: outcome.energy_produced,
            events: outcome.events,
            state: self.state,
            phase: self.phase,
        };
        Ok((entry, ServerMessage::State(self.state_update()), started))
    }

    pub fn state_update(&self) -> StateUpdate {
        StateUpdate {
            schema: STATE_UPDATE_SCHEMA.into(),
            session_id: self.id.clone(),
            phase: self.phase,
            step: self.state.step_index,
            steps_total: self.plant.episode_steps,
            plant: (&self.state).into(),
            score: self.state.energy_total,
            last_step: self.last_step.clone(),
            asked_what: self.suggestion.is_some(),
            asked_why: self.explanation.is_some(),
            remaining_ms: None,
        }
    }

    pub fn quiz_sheet(&self) -> Result<QuizSheet, ProtocolError> {
        self.require(Phase::Quiz, "the quiz")?;
        Ok(self.catalog.quiz_sheet())
    }

    pub fn report(&self) -> Result<Report, ProtocolError> {
        self.require(Phase::Done, "the report")?;
        Ok(self.build_report())
    }

    fn build_report(&self) -> Report {
        let ip = match (&self.quiz, self.tree.metadata().accuracy) {
            (Some(score), Some(a_m)) => uniform_weights(NUM_FEATURES)
                .and_then(|w| {
                    information_power_user(a_m, &w, &score.learned, &self.catalog.rule_totals())
                })
                .ok(),
            _ => None,
        };
        Report {
            schema: REPORT_SCHEMA.into(),
            session_id: self.id.clone(),
            mode: self.mode,
            phase: self.phase,
            steps: self.state.step_index,
            final_score: self.state.energy_total,
            damaged: self.state.damaged,
            what_count: self.what_count,
            why_count: self.why_count,
            auto_skips: self.auto_skips,
            rejections: self.rejections,
            interactions: self.interactions.clone(),
            quiz: self.quiz.clone(),
            ip,
            questionnaire: self.questionnaire.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use infopower_core::fixtures::trained_tree;

    fn session() -> Session {
        Session::new(
            "s1",
            XaiMode::UserAware,
            PlantConfig::default(),
            Arc::new(trained_tree()),
            Arc::new(RuleCatalog::default_catalog()),
        )
        .unwrap()
    }

    fn code(h: &Handled) -> Option<ErrorCode> {
        h.reply.as_ref().err().map(|e| e.code)
    }

    #[test]
    fn why_before_what_is_rejected() {
        let mut s = session();
        s.handle(Command::Start);
        let h = s.handle(Command::AskWhy);
        assert_eq!(code(&h), Some(ErrorCode::WhyBeforeWhat));
        assert!(matches!(h.entry.unwrap().outcome, Outcome::Rejected { code: ErrorCode::WhyBeforeWhat, .. }));
        assert!(s.handle(Command::AskWhat).reply.is_ok());
        assert!(s.handle(Command::AskWhy).reply.is_ok());
        assert_eq!(code(&s.handle(Command::AskWhy)), Some(ErrorCode::DuplicateQuestion));
        assert_eq!(code(&s.handle(Command::AskWhat)), Some(ErrorCode::DuplicateQuestion));
        // a new step clears both
        s.handle(Command::Act { action: Action::Skip });
        assert_eq!(code(&s.handle(Command::AskWhy)), Some(ErrorCode::WhyBeforeWhat));
    }

    #[test]
    fn phases_gate_commands() {
        let mut s = session();
        for c in [Command::Act { action: Action::Skip }, Command::AskWhat, Command::AskWhy] {
            assert_eq!(code(&s.handle(c)), Some(ErrorCode::WrongPhase));
        }
        assert_eq!(s.quiz_sheet().unwrap_err().code, ErrorCode::WrongPhase);
        assert_eq!(s.report().unwrap_err().code, ErrorCode::WrongPhase);
        s.handle(Command::Start);
        assert_eq!(code(&s.handle(Command::Start)), Some(ErrorCode::WrongPhase));
        let quiz = Command::SubmitQuiz { answers: vec![], questionnaire: BTreeMap::new() };
        assert_eq!(code(&s.handle(quiz.clone())), Some(ErrorCode::WrongPhase));
        while s.phase() == Phase::Running {
            s.handle(Command::Act { action: Action::Skip });
        }
        assert_eq!(s.phase(), Phase::Quiz);
        assert_eq!(s.step(), 60);
        assert_eq!(code(&s.handle(Command::AskWhat)), Some(ErrorCode::WrongPhase));
        assert!(s.quiz_sheet().is_ok());
        assert!(matches!(s.handle(quiz.clone()).reply, Ok(ServerMessage::Report(_))));
        assert_eq!(s.phase(), Phase::Done);
        assert_eq!(code(&s.handle(quiz)), Some(ErrorCode::WrongPhase));
        assert!(s.report().is_ok());
    }

    #[test]
    fn expiry_skips_only_the_current_step() {
        let mut s = session();
        s.handle(Command::Start);
        let h = s.handle(Command::Expire { step: 0 });
        assert_eq!(h.step_started, Some(1));
        match h.entry.unwrap().outcome {
            Outcome::Stepped { action, auto_skip, .. } => {
                assert_eq!(action, Action::Skip);
                assert!(auto_skip);
            }
            o => panic!("{o:?}"),
        }
        let stale = s.handle(Command::Expire { step: 0 });
        assert!(stale.entry.is_none());
        assert_eq!(s.step(), 1);
        assert!(s.state_update().last_step.unwrap().auto_skip);
    }

    #[test]
    fn bad_quiz_answers_are_rejected() {
        let mut s = session();
        s.handle(Command::Start);
        while s.phase() == Phase::Running {
            s.handle(Command::Act { action: Action::Skip });
        }
        let bad = Command::SubmitQuiz {
            answers: vec![QuizAnswer { item: "nope".into(), choice: 0 }],
            questionnaire: BTreeMap::new(),
        };
        assert_eq!(code(&s.handle(bad)), Some(ErrorCode::InvalidAnswer));
        assert_eq!(s.phase(), Phase::Quiz);
    }

    #[test]
    fn questions_are_attributed_when_the_step_ends() {
        let mut s = session();
        s.handle(Command::Start);
        s.handle(Command::AskWhat);
        s.handle(Command::AskWhy);
        s.handle(Command::Act { action: Action::FuelDown });
        s.handle(Command::AskWhat);
        s.handle(Command::Expire { step: 1 });
        assert_eq!(s.interactions.total(), 2);
        assert_eq!(s.what_count, 2);
        assert_eq!(s.why_count, 1);
        assert_eq!(s.auto_skips, 1);
        assert_eq!(s.advisor.user_model().observations(), 1);
    }
}
