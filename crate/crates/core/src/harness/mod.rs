//! Seeded synthetic-participant experiments comparing explanation modes.
//!
//! Every participant index gets one seed, shared by all arms, so the arms
//! differ only through the advisor's explanations. Sessions run in parallel
//! and are merged by participant index; the outputs are a pure function of
//! the configuration.

mod profile;
mod session;

pub use profile::{PolicyType, SyntheticUserProfile};
pub use session::{
    habit_action, run_session, SessionContext, SessionHeader, SessionLog, SessionSummary,
    StepRecord, SESSION_LOG_SCHEMA,
};

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures;
use crate::metrics::{
    empirical_weights, uniform_weights, IPReport, InteractionTally, LearnerRecord, MetricsError,
    RuleCatalog, WeightSource, WeightVector,
};
use crate::plant::{Feature, PlantConfig, PlantError, NUM_FEATURES};
use crate::policy::{
    normalized_return, policy_accuracy, sample_eval_states, AccuracyError, ExpertPolicy,
};
use crate::tree::{DecisionTreePolicy, TreeError};
use crate::xai::{XaiError, XaiMode};

pub const EXPERIMENT_CONFIG_SCHEMA: &str = "experiment/v1";
pub const EXPERIMENT_REPORT_SCHEMA: &str = "experiment-report/v1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid profile field {field}: {reason}")]
    InvalidProfile { field: &'static str, reason: String },
    #[error("an arm needs at least one participant")]
    EmptyArm,
    #[error("no modes to compare")]
    NoModes,
    #[error("config: {0}")]
    Config(String),
    #[error("session log: {0}")]
    Log(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Xai(#[from] XaiError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Accuracy(#[from] AccuracyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracySource {
    /// Share of evaluation states where the tree picks the expert's action.
    #[default]
    Agreement,
    /// Tree episode energy over expert episode energy.
    NormalizedReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccuracyConfig {
    pub source: AccuracySource,
    pub eval_episodes: usize,
    /// Fraction of random actions mixed into the expert's evaluation rollouts.
    pub noise: f64,
    pub seed: u64,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        AccuracyConfig {
            source: AccuracySource::Agreement,
            eval_episodes: 20,
            noise: 0.2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Uniform,
    /// Pooled interaction counts of the arm; uniform if the arm never asked.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub users_per_arm: usize,
    #[serde(default = "both_modes")]
    pub modes: Vec<XaiMode>,
    #[serde(default)]
    pub weights: WeightMode,
    /// Tree file, relative to the config file; the bundled tree if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
    #[serde(default)]
    pub accuracy: AccuracyConfig,
    pub profile: SyntheticUserProfile,
    #[serde(default)]
    pub plant: PlantConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn both_modes() -> Vec<XaiMode> {
    vec![XaiMode::Classical, XaiMode::UserAware]
}

impl ExperimentConfig {
    pub fn new(seed: u64, users_per_arm: usize, profile: SyntheticUserProfile) -> Self {
        ExperimentConfig {
            schema: EXPERIMENT_CONFIG_SCHEMA.into(),
            name: default_name(),
            seed,
            users_per_arm,
            modes: both_modes(),
            weights: WeightMode::Uniform,
            tree: None,
            accuracy: AccuracyConfig::default(),
            profile,
            plant: PlantConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file; a relative `tree` path is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(tree), Some(dir)) = (&cfg.tree, path.parent()) {
            if tree.is_relative() {
                cfg.tree = Some(dir.join(tree));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema != EXPERIMENT_CONFIG_SCHEMA {
            return Err(HarnessError::Config(format!(
                "unsupported schema {:?}",
                self.schema
            )));
        }
        if self.users_per_arm == 0 {
            return Err(HarnessError::EmptyArm);
        }
        if self.modes.is_empty() {
            return Err(HarnessError::NoModes);
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                return Err(HarnessError::Config(format!("mode {m} listed twice")));
            }
        }
        if !(0.0..=1.0).contains(&self.accuracy.noise) {
            return Err(HarnessError::Config("accuracy.noise must be in [0, 1]".into()));
        }
        self.profile.validate()?;
        self.plant.validate()?;
        Ok(())
    }

    pub fn load_tree(&self) -> Result<DecisionTreePolicy, HarnessError> {
        match &self.tree {
            Some(path) => Ok(DecisionTreePolicy::load(path)?),
            None => Ok(fixtures::trained_tree()),
        }
    }
}

/// Seed of participant `index`, identical in every arm.
pub fn participant_seed(experiment_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(experiment_seed);
    rng.set_stream(index as u64);
    rng.random()
}

pub fn participant_id(index: usize) -> String {
    format!("u{index:03}")
}

/// Interactions and learned rules per feature within one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub feature: Feature,
    pub what_only: u64,
    pub with_why: u64,
    /// Rules actually acquired, summed over participants.
    pub rules_acquired: u64,
    /// Rule items answered correctly, summed over participants.
    pub rules_correct: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub mode: XaiMode,
    pub ip: f64,
    pub ip_report: IPReport,
    /// Pooled interaction-derived weights; absent if nobody asked anything.
    pub empirical_weights: Option<WeightVector>,
    pub attribution: Vec<FeatureAttribution>,
    pub mean_final_score: f64,
    pub mean_rules_correct: f64,
    pub mean_what_if_correct: f64,
    pub mean_rules_acquired: f64,
    pub what_total: u64,
    pub why_total: u64,
    pub auto_skips: u64,
    pub damaged_sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub name: String,
    pub seed: u64,
    pub users_per_arm: usize,
    pub a_m: f64,
    pub accuracy_source: AccuracySource,
    pub weights: WeightMode,
    pub arms: Vec<ArmReport>,
    /// User-aware IP minus classical IP, when both arms ran.
    pub ip_difference: Option<f64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn arm(&self, mode: XaiMode) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.mode == mode)
    }

    /// Per-participant rows of every arm, each arm closed by its mean row.
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut out = String::new();
        for (i, arm) in self.arms.iter().enumerate() {
            let csv = arm.ip_report.to_csv()?;
            let body = if i == 0 {
                csv.as_str()
            } else {
                csv.split_once('\n').map_or("", |(_, rest)| rest)
            };
            out.push_str(body);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Arm-major, then by participant index.
    pub logs: Vec<SessionLog>,
}

impl ExperimentOutput {
    pub fn log_file_name(log: &SessionLog) -> String {
        format!("{}-{}.jsonl", log.header.mode, log.header.user_id)
    }

    /// Writes `report.json`, `summary.csv` and `logs/<mode>-<user>.jsonl`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
        let dir = dir.as_ref();
        let logs = dir.join("logs");
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| HarnessError::Io { path, source }
        };
        std::fs::create_dir_all(&logs).map_err(io(&logs))?;
        let p = dir.join("report.json");
        std::fs::write(&p, self.report.to_json()).map_err(io(&p))?;
        let p = dir.join("summary.csv");
        std::fs::write(&p, self.report.to_csv()?).map_err(io(&p))?;
        for log in &self.logs {
            let p = logs.join(Self::log_file_name(log));
            std::fs::write(&p, log.to_jsonl()).map_err(io(&p))?;
        }
        Ok(())
    }
}

/// Model accuracy of `tree` as configured.
pub fn model_accuracy(
    tree: &DecisionTreePolicy,
    plant: &PlantConfig,
    cfg: &AccuracyConfig,
) -> Result<f64, HarnessError> {
    let mut expert = ExpertPolicy::new(plant.clone());
    let a_m = match cfg.source {
        AccuracySource::Agreement => {
            let states = sample_eval_states(plant, cfg.eval_episodes, cfg.noise, cfg.seed)?;
            policy_accuracy(&mut &*tree, &mut expert, &states)?
        }
        AccuracySource::NormalizedReturn => {
            normalized_return(plant, &mut &*tree, &mut expert, cfg.eval_episodes)?
        }
    };
    Ok(a_m)
}

pub fn learner_record(log: &SessionLog) -> LearnerRecord {
    let s = &log.summary;
    LearnerRecord {
        user_id: log.header.user_id.clone(),
        learned: s.score.learned.clone(),
        interactions: s.interactions.clone(),
        quiz_answers: s.quiz.clone(),
        what_if_correct: s.score.what_if_correct,
        what_if_total: s.score.what_if_total,
        final_score: s.final_score,
        what_count: s.what_count,
        why_count: s.why_count,
        questionnaire: Default::default(),
    }
}

pub fn run_experiment(
    config: &ExperimentConfig,
    tree: &DecisionTreePolicy,
    catalog: &RuleCatalog,
) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let a_m = model_accuracy(tree, &config.plant, &config.accuracy)?;
    let ctx = SessionContext {
        tree,
        catalog,
        plant: &config.plant,
        profile: &config.profile,
    };
    let jobs: Vec<(XaiMode, usize)> = config
        .modes
        .iter()
        .flat_map(|&m| (0..config.users_per_arm).map(move |i| (m, i)))
        .collect();
    let logs = jobs
        .par_iter()
        .map(|&(mode, i)| {
            run_session(ctx, mode, participant_seed(config.seed, i), &participant_id(i))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let arms = config
        .modes
        .iter()
        .zip(logs.chunks(config.users_per_arm))
        .map(|(&mode, arm_logs)| arm_report(mode, arm_logs, a_m, config.weights, catalog))
        .collect::<Result<Vec<_>, _>>()?;
    let ip_of = |m| arms.iter().find(|a: &&ArmReport| a.mode == m).map(|a| a.ip);
    let ip_difference = match (ip_of(XaiMode::UserAware), ip_of(XaiMode::Classical)) {
        (Some(ua), Some(cl)) => Some(ua - cl),
        _ => None,
    };
    Ok(ExperimentOutput {
        report: ExperimentReport {
            schema: EXPERIMENT_REPORT_SCHEMA.into(),
            name: config.name.clone(),
            seed: config.seed,
            users_per_arm: config.users_per_arm,
            a_m,
            accuracy_source: config.accuracy.source,
            weights: config.weights,
            arms,
            ip_difference,
        },
        logs,
    })
}

fn arm_report(
    mode: XaiMode,
    logs: &[SessionLog],
    a_m: f64,
    weight_mode: WeightMode,
    catalog: &RuleCatalog,
) -> Result<ArmReport, HarnessError> {
    if logs.is_empty() {
        return Err(HarnessError::EmptyArm);
    }
    let records: Vec<LearnerRecord> = logs.iter().map(learner_record).collect();
    let mut pooled = InteractionTally::new();
    for r in &records {
        pooled.merge(&r.interactions);
    }
    let empirical = match empirical_weights(pooled.counts()) {
        Ok(w) => Some(w),
        Err(MetricsError::DegenerateWeights) => None,
        Err(e) => return Err(e.into()),
    };
    let (weights, source) = match (weight_mode, &empirical) {
        (WeightMode::Empirical, Some(w)) => (w.clone(), WeightSource::Empirical),
        _ => (uniform_weights(NUM_FEATURES)?, WeightSource::Uniform),
    };
    let ip_report = IPReport::build(mode.key(), a_m, weights, source, &records, catalog)?;

    let mut attribution: Vec<FeatureAttribution> = Feature::ALL
        .iter()
        .map(|&feature| FeatureAttribution {
            feature,
            what_only: 0,
            with_why: 0,
            rules_acquired: 0,
            rules_correct: 0,
        })
        .collect();
    for log in logs {
        for step in &log.steps {
            if let Some(f) = step.attributed_feature {
                let row = &mut attribution[f.index()];
                if step.why {
                    row.with_why += 1;
                } else {
                    row.what_only += 1;
                }
            }
        }
        for id in &log.summary.learned_rules {
            if let Some(rule) = catalog.rules().iter().find(|r| &r.id == id) {
                attribution[rule.feature.index()].rules_acquired += 1;
            }
        }
        for (j, &n) in log.summary.score.learned.iter().enumerate() {
            attribution[j].rules_correct += n as u64;
        }
    }

    let n = logs.len() as f64;
    let mean = |f: &dyn Fn(&SessionLog) -> f64| logs.iter().map(f).sum::<f64>() / n;
    Ok(ArmReport {
        mode,
        ip: ip_report.ip,
        empirical_weights: empirical,
        attribution,
        mean_final_score: mean(&|l| l.summary.final_score),
        mean_rules_correct: mean(&|l| l.summary.score.rule_items_correct as f64),
        mean_what_if_correct: mean(&|l| l.summary.score.what_if_correct as f64),
        mean_rules_acquired: mean(&|l| l.summary.learned_rules.len() as f64),
        what_total: logs.iter().map(|l| l.summary.what_count as u64).sum(),
        why_total: logs.iter().map(|l| l.summary.why_count as u64).sum(),
        auto_skips: logs.iter().map(|l| l.summary.auto_skips as u64).sum(),
        damaged_sessions: logs.iter().filter(|l| l.summary.damaged).count(),
        ip_report,
    })
}
