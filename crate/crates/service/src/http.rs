//! HTTP and WebSocket routes. Both carry the same `ServerMessage` JSON.

use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use infopower_core::metrics::QuizAnswer;
use infopower_core::plant::Action;
use infopower_core::xai::XaiMode;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;

use crate::actor::{Request, SessionHandle};
use crate::app::AppState;
use crate::protocol::{ClientMessage, ErrorCode, ProtocolError, ServerMessage};
use crate::session::Command;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state_of))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/action", post(act))
        .route("/sessions/{id}/what", post(ask_what))
        .route("/sessions/{id}/why", post(ask_why))
        .route("/sessions/{id}/quiz", get(quiz_sheet).post(submit_quiz))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/ws", get(ws))
        .with_state(state)
}

pub fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::WrongPhase | ErrorCode::WhyBeforeWhat | ErrorCode::DuplicateQuestion => {
            StatusCode::CONFLICT
        }
        ErrorCode::UnknownSession => StatusCode::NOT_FOUND,
        ErrorCode::InvalidAnswer | ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
        ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

struct Reply(Result<ServerMessage, ProtocolError>, StatusCode);

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        match self.0 {
            Ok(msg) => (self.1, Json(msg)).into_response(),
            Err(e) => (status_for(e.code), Json(ServerMessage::Error(e))).into_response(),
        }
    }
}

impl From<Result<ServerMessage, ProtocolError>> for Reply {
    fn from(r: Result<ServerMessage, ProtocolError>) -> Self {
        Reply(r, StatusCode::OK)
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ProtocolError> {
    serde_json::from_slice(body).map_err(|e| ProtocolError::new(ErrorCode::BadRequest, e.to_string()))
}

async fn call(state: &AppState, id: &str, request: Request) -> Reply {
    match state.get(id) {
        Ok(h) => h.request(request).await.into(),
        Err(e) => Err(e).into(),
    }
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "sessions": state.session_count() }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    mode: Option<XaiMode>,
}

async fn create(State(state): State<AppState>, body: Bytes) -> Reply {
    let body: CreateBody = if body.iter().all(u8::is_ascii_whitespace) {
        CreateBody::default()
    } else {
        match parse(&body) {
            Ok(b) => b,
            Err(e) => return Err(e).into(),
        }
    };
    match state.create_session(body.mode) {
        Ok((_, update)) => Reply(Ok(ServerMessage::State(update)), StatusCode::CREATED),
        Err(e) => {
            tracing::error!(error = %e, "could not create session");
            Err(ProtocolError::new(ErrorCode::Internal, e.to_string())).into()
        }
    }
}

async fn state_of(State(state): State<AppState>, Path(id): Path<String>) -> Reply {
    call(&state, &id, Request::GetState).await
}

async fn start(State(state): State<AppState>, Path(id): Path<String>) -> Reply {
    call(&state, &id, Request::Command(Command::Start)).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActBody {
    action: Action,
}

async fn act(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Reply {
    match parse::<ActBody>(&body) {
        Ok(b) => call(&state, &id, Request::Command(Command::Act { action: b.action })).await,
        Err(e) => Err(e).into(),
    }
}

async fn ask_what(State(state): State<AppState>, Path(id): Path<String>) -> Reply {
    call(&state, &id, Request::Command(Command::AskWhat)).await
}

async fn ask_why(State(state): State<AppState>, Path(id): Path<String>) -> Reply {
    call(&state, &id, Request::Command(Command::AskWhy)).await
}

async fn quiz_sheet(State(state): State<AppState>, Path(id): Path<String>) -> Reply {
    call(&state, &id, Request::GetQuiz).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuizBody {
    answers: Vec<QuizAnswer>,
    #[serde(default)]
    questionnaire: BTreeMap<String, i64>,
}

async fn submit_quiz(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Reply {
    match parse::<QuizBody>(&body) {
        Ok(b) => {
            let cmd = Command::SubmitQuiz { answers: b.answers, questionnaire: b.questionnaire };
            call(&state, &id, Request::Command(cmd)).await
        }
        Err(e) => Err(e).into(),
    }
}

async fn report(State(state): State<AppState>, Path(id): Path<String>) -> Reply {
    call(&state, &id, Request::GetReport).await
}

async fn ws(State(state): State<AppState>, Path(id): Path<String>, upgrade: WebSocketUpgrade) -> Response {
    match state.get(&id) {
        Ok(handle) => upgrade.on_upgrade(move |socket| ws_loop(socket, handle)),
        Err(e) => Reply(Err(e), StatusCode::OK).into_response(),
    }
}

impl From<ClientMessage> for Request {
    fn from(m: ClientMessage) -> Self {
        match m {
            ClientMessage::Start => Request::Command(Command::Start),
            ClientMessage::Act { action } => Request::Command(Command::Act { action }),
            ClientMessage::AskWhat => Request::Command(Command::AskWhat),
            ClientMessage::AskWhy => Request::Command(Command::AskWhy),
            ClientMessage::GetState => Request::GetState,
            ClientMessage::GetQuiz => Request::GetQuiz,
            ClientMessage::SubmitQuiz { answers, questionnaire } => {
                Request::Command(Command::SubmitQuiz { answers, questionnaire })
            }
            ClientMessage::GetReport => Request::GetReport,
        }
    }
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("server message serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Sends the current state, then relays replies and pushed state updates.
/// A successful start or act is answered by the pushed update alone.
async fn ws_loop(mut socket: WebSocket, handle: SessionHandle) {
    let mut updates = handle.subscribe();
    let initial = handle.request(Request::GetState).await.unwrap_or_else(ServerMessage::Error);
    if !send(&mut socket, &initial).await {
        return;
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(m) => {
                        let pushed = matches!(m, ClientMessage::Start | ClientMessage::Act { .. });
                        match handle.request(m.into()).await {
                            Ok(ServerMessage::State(_)) if pushed => continue,
                            r => r.unwrap_or_else(ServerMessage::Error),
                        }
                    }
                    Err(e) => ServerMessage::Error(ProtocolError::new(ErrorCode::BadRequest, e.to_string())),
                };
                if !send(&mut socket, &reply).await {
                    break;
                }
            }
            update = updates.recv() => {
                let msg = match update {
                    Ok(m) => m,
                    Err(RecvError::Lagged(_)) => {
                        handle.request(Request::GetState).await.unwrap_or_else(ServerMessage::Error)
                    }
                    Err(RecvError::Closed) => break,
                };
                if !send(&mut socket, &msg).await {
                    break;
                }
            }
        }
    }
}
