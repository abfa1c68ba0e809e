//! Wire format shared by the HTTP endpoints and the WebSocket channel.
//!
//! Every server payload carries a `type` tag and, for the data payloads, a
//! versioned `schema`. Only plant state, suggestions and explanation texts
//! reach the client; the rule catalog and the tree stay on the server.

use std::collections::BTreeMap;

use infopower_core::metrics::{InteractionTally, QuizAnswer, QuizScore, QuizSheet};
use infopower_core::plant::{Action, PlantEvent, PlantState, RodBank};
use infopower_core::xai::XaiMode;
use serde::{Deserialize, Serialize};

pub const STATE_UPDATE_SCHEMA: &str = "state-update/v1";
pub const SUGGESTION_SCHEMA: &str = "suggestion/v1";
pub const EXPLANATION_SCHEMA: &str = "explanation/v1";
pub const REPORT_SCHEMA: &str = "session-report/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Briefing,
    Running,
    Quiz,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    WrongPhase,
    WhyBeforeWhat,
    DuplicateQuestion,
    UnknownSession,
    InvalidAnswer,
    BadRequest,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::WrongPhase => "WRONG_PHASE",
            ErrorCode::WhyBeforeWhat => "WHY_BEFORE_WHAT",
            ErrorCode::DuplicateQuestion => "DUPLICATE_QUESTION",
            ErrorCode::UnknownSession => "UNKNOWN_SESSION",
            ErrorCode::InvalidAnswer => "INVALID_ANSWER",
            ErrorCode::BadRequest => "BAD_REQUEST",
            ErrorCode::Internal => "INTERNAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
}

impl ProtocolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ProtocolError { code, message: message.into() }
    }
}

/// Gauges and rod positions as shown on the control panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantView {
    pub temperature: f64,
    pub pressure: f64,
    pub water_level: f64,
    pub power: f64,
    pub rods: RodBank,
    pub damaged: bool,
}

impl From<&PlantState> for PlantView {
    fn from(s: &PlantState) -> Self {
        PlantView {
            temperature: s.temperature,
            pressure: s.pressure,
            water_level: s.water_level,
            power: s.power,
            rods: s.rods,
            damaged: s.damaged,
        }
    }
}

/// What happened in the step that just ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u32,
    pub action: Action,
    pub auto_skip: bool,
    pub energy: f64,
    pub events: Vec<PlantEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateUpdate {
    pub schema: String,
    pub session_id: String,
    pub phase: Phase,
    pub step: u32,
    pub steps_total: u32,
    pub plant: PlantView,
    /// Energy produced so far.
    pub score: f64,
    pub last_step: Option<StepReport>,
    pub asked_what: bool,
    pub asked_why: bool,
    /// Time left in the current step, filled in by the session owner.
    pub remaining_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionView {
    pub schema: String,
    pub step: u32,
    pub action: Action,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationView {
    pub schema: String,
    pub step: u32,
    pub text: String,
}

/// Per-session measures for the experimenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub session_id: String,
    pub mode: XaiMode,
    pub phase: Phase,
    pub steps: u32,
    pub final_score: f64,
    pub damaged: bool,
    pub what_count: u32,
    pub why_count: u32,
    pub auto_skips: u32,
    pub rejections: u32,
    pub interactions: InteractionTally,
    pub quiz: Option<QuizScore>,
    /// Information power for this participant, when the tree's accuracy is known.
    pub ip: Option<f64>,
    pub questionnaire: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Start,
    Act {
        action: Action,
    },
    AskWhat,
    AskWhy,
    GetState,
    GetQuiz,
    SubmitQuiz {
        answers: Vec<QuizAnswer>,
        #[serde(default)]
        questionnaire: BTreeMap<String, i64>,
    },
    GetReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateUpdate),
    Suggestion(SuggestionView),
    Explanation(ExplanationView),
    QuizSheet(QuizSheet),
    Report(Report),
    Error(ProtocolError),
}
