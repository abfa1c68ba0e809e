//! Policies that drive the plant: the scripted expert used as ground truth
//! for model accuracy, a uniform-random baseline, and rollout helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{
    apply_action, new_plant, Action, PlantConfig, PlantError, PlantState, RodLevel, TwoLevel,
};

pub trait Policy {
    fn act(&mut self, state: &PlantState) -> Action;
}

impl<F: FnMut(&PlantState) -> Action> Policy for F {
    fn act(&mut self, state: &PlantState) -> Action {
        self(state)
    }
}

/// Hand-written operator: starts fission safely, refills the steam generator
/// below the low-water threshold, and eases the regulatory rods (or scrams)
/// near the critical temperature and pressure.
#[derive(Debug, Clone)]
pub struct ExpertPolicy {
    config: PlantConfig,
}

impl ExpertPolicy {
    pub fn new(config: PlantConfig) -> Self {
        ExpertPolicy { config }
    }

    pub fn decide(&self, s: &PlantState) -> Action {
        let c = &self.config;
        let hot = s.temperature >= 0.85 * c.critical_temperature
            || s.pressure >= 0.85 * c.critical_pressure;
        let cool = s.temperature < 0.5 * c.critical_temperature
            && s.pressure < 0.5 * c.critical_pressure;
        if s.rods.security == TwoLevel::Up && s.water_level <= c.low_water_threshold {
            return Action::AddWater;
        }
        if hot {
            return if s.rods.regulatory != RodLevel::Up {
                Action::RegulatoryUp
            } else if s.rods.security == TwoLevel::Up {
                Action::SecurityDown
            } else {
                Action::Skip
            };
        }
        if s.rods.security == TwoLevel::Down {
            return if cool { Action::SecurityUp } else { Action::Skip };
        }
        if s.rods.fuel == TwoLevel::Up {
            return Action::FuelDown;
        }
        if s.rods.sustain != RodLevel::Down {
            return Action::SustainDown;
        }
        if s.power < 0.5 * crate::plant::MAX_POWER_MW && cool && s.rods.regulatory == RodLevel::Up {
            return Action::RegulatoryMedium;
        }
        if s.power >= 0.9 * crate::plant::MAX_POWER_MW && s.rods.regulatory != RodLevel::Up {
            return Action::RegulatoryUp;
        }
        Action::Skip
    }
}

impl Policy for ExpertPolicy {
    fn act(&mut self, state: &PlantState) -> Action {
        self.decide(state)
    }
}

/// Uniform over the twelve actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _state: &PlantState) -> Action {
        Action::ALL[self.rng.random_range(0..Action::ALL.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub energy: f64,
    pub steps: u32,
    pub damaged: bool,
}

/// Play one episode from the initial state until damage or the step limit.
pub fn run_episode(
    config: &PlantConfig,
    policy: &mut impl Policy,
) -> Result<EpisodeSummary, PlantError> {
    let mut state = new_plant(config)?;
    while !state.is_terminal(config) {
        let action = policy.act(&state);
        state = apply_action(&state, action, config)?.next_state;
    }
    Ok(EpisodeSummary {
        energy: state.energy_total,
        steps: state.step_index,
        damaged: state.damaged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_energy: f64,
    pub min_energy: f64,
    pub max_energy: f64,
    pub damage_rate: f64,
}

pub fn evaluate(
    config: &PlantConfig,
    policy: &mut impl Policy,
    episodes: usize,
) -> Result<EvalSummary, PlantError> {
    let mut energies = Vec::with_capacity(episodes);
    let mut damaged = 0usize;
    for _ in 0..episodes {
        let ep = run_episode(config, policy)?;
        energies.push(ep.energy);
        damaged += ep.damaged as usize;
    }
    let n = episodes.max(1) as f64;
    Ok(EvalSummary {
        episodes,
        mean_energy: energies.iter().sum::<f64>() / n,
        min_energy: energies.iter().copied().fold(f64::INFINITY, f64::min),
        max_energy: energies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        damage_rate: damaged as f64 / n,
    })
}

/// States visited by the expert when a fraction `noise` of its actions is
/// replaced by random ones. Used as the evaluation set for model accuracy.
pub fn sample_eval_states(
    config: &PlantConfig,
    episodes: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<PlantState>, PlantError> {
    let expert = ExpertPolicy::new(config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::new();
    for _ in 0..episodes {
        let mut state = new_plant(config)?;
        while !state.is_terminal(config) {
            states.push(state);
            let action = if rng.random_bool(noise) {
                Action::ALL[rng.random_range(0..Action::ALL.len())]
            } else {
                expert.decide(&state)
            };
            state = apply_action(&state, action, config)?.next_state;
        }
    }
    Ok(states)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AccuracyError {
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("reference policy produces no energy")]
    ZeroReferenceReturn,
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Fraction of `states` on which `model` picks the same action as `reference`.
pub fn policy_accuracy(
    model: &mut impl Policy,
    reference: &mut impl Policy,
    states: &[PlantState],
) -> Result<f64, AccuracyError> {
    if states.is_empty() {
        return Err(AccuracyError::EmptyEvalSet);
    }
    let agree = states
        .iter()
        .filter(|s| model.act(s) == reference.act(s))
        .count();
    Ok(agree as f64 / states.len() as f64)
}

/// Mean episode energy of `model` relative to `reference`, clamped to [0, 1].
pub fn normalized_return(
    config: &PlantConfig,
    model: &mut impl Policy,
    reference: &mut impl Policy,
    episodes: usize,
) -> Result<f64, AccuracyError> {
    if episodes == 0 {
        return Err(AccuracyError::EmptyEvalSet);
    }
    let m = evaluate(config, model, episodes)?.mean_energy;
    let r = evaluate(config, reference, episodes)?.mean_energy;
    if r <= 0.0 {
        return Err(AccuracyError::ZeroReferenceReturn);
    }
    Ok((m / r).clamp(0.0, 1.0))
}
