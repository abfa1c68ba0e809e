//! One task per session. Client commands and timer expiries share the
//! session's queue, so they are applied in a single order.

use std::time::Duration;

use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::Instant;

use crate::journal::Journal;
use crate::protocol::{ErrorCode, ProtocolError, ServerMessage};
use crate::session::{Command, Outcome, Session};

const QUEUE_DEPTH: usize = 64;
const UPDATE_BUFFER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Command(Command),
    GetState,
    GetQuiz,
    GetReport,
}

struct Envelope {
    request: Request,
    reply: Option<oneshot::Sender<Result<ServerMessage, ProtocolError>>>,
}

/// Cheap, cloneable address of a running session.
#[derive(Debug, Clone)]
pub struct SessionHandle {
    id: String,
    tx: mpsc::Sender<Envelope>,
    updates: broadcast::Sender<ServerMessage>,
}

impl std::fmt::Debug for Envelope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Envelope").field("request", &self.request).finish()
    }
}

impl SessionHandle {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub async fn request(&self, request: Request) -> Result<ServerMessage, ProtocolError> {
        let (reply, rx) = oneshot::channel();
        let gone = || ProtocolError::new(ErrorCode::Internal, "session task stopped");
        self.tx
            .send(Envelope { request, reply: Some(reply) })
            .await
            .map_err(|_| gone())?;
        rx.await.map_err(|_| gone())?
    }

    /// State updates pushed after every step, including auto-skips.
    pub fn subscribe(&self) -> broadcast::Receiver<ServerMessage> {
        self.updates.subscribe()
    }
}

/// Start the session's task. A running session gets a fresh step timer.
pub fn spawn_session(session: Session, journal: Option<Journal>, step: Duration) -> SessionHandle {
    let (tx, rx) = mpsc::channel(QUEUE_DEPTH);
    let (updates, _) = broadcast::channel(UPDATE_BUFFER);
    let handle = SessionHandle { id: session.id().to_string(), tx, updates: updates.clone() };
    let actor = Actor {
        session,
        journal,
        step,
        deadline: None,
        timers: handle.tx.downgrade(),
        updates,
    };
    tokio::spawn(actor.run(rx));
    handle
}

struct Actor {
    session: Session,
    journal: Option<Journal>,
    step: Duration,
    deadline: Option<Instant>,
    timers: mpsc::WeakSender<Envelope>,
    updates: broadcast::Sender<ServerMessage>,
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::Receiver<Envelope>) {
        if self.session.phase() == crate::protocol::Phase::Running {
            self.arm_timer(self.session.step());
        }
        while let Some(env) = rx.recv().await {
            let reply = self.serve(env.request);
            if let Some(tx) = env.reply {
                let _ = tx.send(reply);
            }
        }
        tracing::debug!(session = self.session.id(), "session task finished");
    }

    fn arm_timer(&mut self, step: u32) {
        let at = Instant::now() + self.step;
        self.deadline = Some(at);
        let weak = self.timers.clone();
        tokio::spawn(async move {
            tokio::time::sleep_until(at).await;
            if let Some(tx) = weak.upgrade() {
                let env = Envelope { request: Request::Command(Command::Expire { step }), reply: None };
                let _ = tx.send(env).await;
            }
        });
    }

    fn stamp(&self, msg: ServerMessage) -> ServerMessage {
        match msg {
            ServerMessage::State(mut s) => {
                s.remaining_ms = self
                    .deadline
                    .filter(|_| s.phase == crate::protocol::Phase::Running)
                    .map(|d| d.saturating_duration_since(Instant::now()).as_millis() as u64);
                ServerMessage::State(s)
            }
            other => other,
        }
    }

    fn serve(&mut self, request: Request) -> Result<ServerMessage, ProtocolError> {
        match request {
            Request::GetState => Ok(self.stamp(ServerMessage::State(self.session.state_update()))),
            Request::GetQuiz => self.session.quiz_sheet().map(ServerMessage::QuizSheet),
            Request::GetReport => self.session.report().map(ServerMessage::Report),
            Request::Command(cmd) => {
                let handled = self.session.handle(cmd);
                if let (Some(entry), Some(journal)) = (&handled.entry, self.journal.as_mut()) {
                    if let Err(e) = journal.append(entry) {
                        tracing::error!(session = self.session.id(), error = %e, "journal append failed");
                        return Err(ProtocolError::new(ErrorCode::Internal, "could not persist the step"));
                    }
                }
                if let Some(step) = handled.step_started {
                    self.arm_timer(step);
                }
                let moved = matches!(
                    handled.entry.as_ref().map(|e| &e.outcome),
                    Some(Outcome::Started | Outcome::Stepped { .. })
                );
                if moved {
                    let update = self.stamp(ServerMessage::State(self.session.state_update()));
                    let _ = self.updates.send(update);
                }
                handled.reply.map(|m| self.stamp(m))
            }
        }
    }
}
