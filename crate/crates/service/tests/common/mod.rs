#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use infopower_core::fixtures::trained_tree;
use infopower_core::metrics::{QuizAnswer, RuleCatalog};
use infopower_core::plant::{Action, PlantConfig};
use infopower_core::tree::DecisionTreePolicy;
use infopower_core::xai::XaiMode;
use infopower_service::protocol::Phase;
use infopower_service::session::{Command, Handled, Outcome, Session};
use infopower_service::{AppState, Settings};

pub const GOLDEN_ID: &str = "golden-0001";

pub fn tree() -> Arc<DecisionTreePolicy> {
    Arc::new(trained_tree())
}

pub fn catalog() -> Arc<RuleCatalog> {
    Arc::new(RuleCatalog::default_catalog())
}

pub fn session(id: &str, mode: XaiMode) -> Session {
    Session::new(id, mode, PlantConfig::default(), tree(), catalog()).unwrap()
}

pub fn app(step: Duration, journal_dir: Option<std::path::PathBuf>) -> AppState {
    let settings = Settings { mode: XaiMode::UserAware, plant: PlantConfig::default(), step, journal_dir };
    AppState::new(tree(), catalog(), settings)
}

/// Answers choosing option `index mod options` for every item.
pub fn fixed_answers(catalog: &RuleCatalog) -> Vec<QuizAnswer> {
    catalog
        .quiz()
        .iter()
        .enumerate()
        .map(|(i, q)| QuizAnswer { item: q.id.clone(), choice: i % q.options.len() })
        .collect()
}

/// A scripted participant covering every command, rejections included,
/// until the `stop` step or the end of the session.
pub fn drive(session: &mut Session, stop: Option<u32>, mut sink: impl FnMut(&Handled)) {
    let mut run = |s: &mut Session, c: Command| {
        let h = s.handle(c);
        sink(&h);
        h
    };
    if session.phase() == Phase::Briefing {
        run(session, Command::AskWhy);
        run(session, Command::Start);
        run(session, Command::Start);
    }
    while session.phase() == Phase::Running {
        let step = session.step();
        if Some(step) == stop {
            return;
        }
        let mut suggested = None;
        if step.is_multiple_of(3) {
            if let Some(e) = run(session, Command::AskWhat).entry {
                if let Outcome::Suggested { action, .. } = e.outcome {
                    suggested = Some(action);
                }
            }
        }
        if step.is_multiple_of(6) {
            run(session, Command::AskWhy);
            run(session, Command::AskWhy);
        }
        if step % 10 == 9 {
            run(session, Command::Expire { step });
            run(session, Command::Expire { step });
        } else {
            let action = suggested.unwrap_or(Action::ALL[(step as usize * 5) % Action::ALL.len()]);
            run(session, Command::Act { action });
        }
    }
    if session.phase() == Phase::Quiz {
        let answers = fixed_answers(&RuleCatalog::default_catalog());
        let bad = vec![QuizAnswer { item: "q-none".into(), choice: 0 }];
        run(session, Command::SubmitQuiz { answers: bad, questionnaire: BTreeMap::new() });
        let questionnaire = BTreeMap::from([("trust".to_string(), 4), ("workload".to_string(), 2)]);
        run(session, Command::SubmitQuiz { answers, questionnaire });
    }
}
