//! Step-based simulation of the pressurised-water-reactor task.
//!
//! The transition function is pure: `apply_action(state, action, config)`
//! returns a fresh [`StepOutcome`] and never mutates its inputs. Within a
//! step the action's rod/water effect is applied first, then the feature
//! updates, then the damage check.

mod action;
mod config;
mod features;

pub use action::{Action, NUM_ACTIONS};
pub use config::{FuelDepletion, PlantConfig, RegulatoryRates, PLANT_CONFIG_SCHEMA};
pub use features::{Feature, FeatureVector, FEATURE_ENCODING_VERSION, NUM_FEATURES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_POWER_MW: f64 = 1000.0;
/// Power that a 1000 MW reactor delivers in one 10 s step, per energy unit.
pub const ENERGY_DIVISOR: f64 = 360.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("invalid plant config: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("cannot parse plant config: {0}")]
    ConfigParse(String),
    #[error("episode is over: {0}")]
    Terminal(TerminalReason),
    #[error("value {value} is not a valid encoding for {feature}")]
    BadEncoding { feature: Feature, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    Damaged,
    EpisodeOver,
}

impl std::fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalReason::Damaged => f.write_str("the plant is damaged"),
            TerminalReason::EpisodeOver => f.write_str("the episode length has been reached"),
        }
    }
}

/// Position of a three-level rod (sustain, regulatory).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RodLevel {
    Up,
    Medium,
    Down,
}

/// Position of a two-level rod (security, fuel).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoLevel {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RodBank {
    pub security: TwoLevel,
    pub fuel: TwoLevel,
    pub sustain: RodLevel,
    pub regulatory: RodLevel,
}

impl Default for RodBank {
    fn default() -> Self {
        RodBank {
            security: TwoLevel::Up,
            fuel: TwoLevel::Up,
            sustain: RodLevel::Up,
            regulatory: RodLevel::Up,
        }
    }
}

impl RodBank {
    /// Security up and fuel down: the rods call for fission.
    pub fn fission_configuration(&self) -> bool {
        self.security == TwoLevel::Up && self.fuel == TwoLevel::Down
    }
}

/// Snapshot of the plant. Field order is the JSON field order and is part
/// of the log format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub temperature: f64,
    pub pressure: f64,
    pub water_level: f64,
    pub power: f64,
    pub rods: RodBank,
    pub step_index: u32,
    pub damaged: bool,
    pub energy_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageCause {
    Temperature,
    Pressure,
    DryCore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PlantEvent {
    FissionStarted,
    FissionStopped,
    /// All simultaneous causes, temperature first.
    DamageOccurred { causes: Vec<DamageCause> },
    LowWaterWarning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: PlantState,
    pub energy_produced: f64,
    pub events: Vec<PlantEvent>,
}

impl StepOutcome {
    pub fn primary_damage_cause(&self) -> Option<DamageCause> {
        self.events.iter().find_map(|e| match e {
            PlantEvent::DamageOccurred { causes } => causes.first().copied(),
            _ => None,
        })
    }

    pub fn damaged(&self) -> bool {
        self.next_state.damaged
    }
}

/// Initial plant state for `config`: cold, full of water, every rod up.
pub fn new_plant(config: &PlantConfig) -> Result<PlantState, PlantError> {
    config.validate()?;
    Ok(PlantState {
        temperature: config.initial_temperature,
        pressure: config.initial_pressure,
        water_level: config.initial_water_level,
        power: 0.0,
        rods: RodBank::default(),
        step_index: 0,
        damaged: false,
        energy_total: 0.0,
    })
}

pub fn fission_active(state: &PlantState) -> bool {
    state.rods.fission_configuration() && state.water_level > 0.0 && !state.damaged
}

impl PlantState {
    pub fn is_terminal(&self, config: &PlantConfig) -> bool {
        self.damaged || self.step_index >= config.episode_steps
    }

    fn terminal_reason(&self, config: &PlantConfig) -> Option<TerminalReason> {
        if self.damaged {
            Some(TerminalReason::Damaged)
        } else if self.step_index >= config.episode_steps {
            Some(TerminalReason::EpisodeOver)
        } else {
            None
        }
    }
}

fn apply_effect(state: &mut PlantState, action: Action, config: &PlantConfig) {
    let rods = &mut state.rods;
    match action {
        Action::SecurityUp => rods.security = TwoLevel::Up,
        Action::SecurityDown => rods.security = TwoLevel::Down,
        Action::FuelUp => rods.fuel = TwoLevel::Up,
        Action::FuelDown => rods.fuel = TwoLevel::Down,
        Action::SustainUp => rods.sustain = RodLevel::Up,
        Action::SustainMedium => rods.sustain = RodLevel::Medium,
        Action::SustainDown => rods.sustain = RodLevel::Down,
        Action::RegulatoryUp => rods.regulatory = RodLevel::Up,
        Action::RegulatoryMedium => rods.regulatory = RodLevel::Medium,
        Action::RegulatoryDown => rods.regulatory = RodLevel::Down,
        Action::AddWater => {
            state.water_level = (state.water_level + config.water_refill).min(100.0);
        }
        Action::Skip => {}
    }
}

/// Advance the plant by one step.
///
/// A step is "active" when, after the action's effect, [`fission_active`]
/// holds. Running the rods in fission configuration with an empty steam
/// generator damages the core. A step that ends damaged produces no energy.
pub fn apply_action(
    state: &PlantState,
    action: Action,
    config: &PlantConfig,
) -> Result<StepOutcome, PlantError> {
    if let Some(reason) = state.terminal_reason(config) {
        return Err(PlantError::Terminal(reason));
    }
    let was_active = fission_active(state);
    let mut next = *state;
    apply_effect(&mut next, action, config);

    let active = fission_active(&next);
    let dry_core = next.rods.fission_configuration() && next.water_level <= 0.0;
    let (t_lo, t_hi) = (config.initial_temperature, config.max_temperature);
    let (p_lo, p_hi) = (config.initial_pressure, config.max_pressure);
    let depletion = config.fuel_depletion.at(next.rods.sustain);

    if active {
        let rate = config.regulatory_rates.at(next.rods.regulatory);
        next.temperature = (next.temperature + rate * config.temperature_step).clamp(t_lo, t_hi);
        next.pressure = (next.pressure + rate * config.pressure_step).clamp(p_lo, p_hi);
        next.water_level = (next.water_level - rate * config.water_step).clamp(0.0, 100.0);
        next.power = (next.power + rate * config.power_step - depletion).clamp(0.0, MAX_POWER_MW);
    } else {
        let k = config.cooling_factor;
        next.temperature =
            (next.temperature - k * (next.temperature - t_lo)).clamp(t_lo, t_hi);
        next.pressure = (next.pressure - k * (next.pressure - p_lo)).clamp(p_lo, p_hi);
        next.power = (next.power - depletion).clamp(0.0, MAX_POWER_MW);
    }

    let mut causes = Vec::new();
    if next.temperature > config.critical_temperature {
        causes.push(DamageCause::Temperature);
    }
    if next.pressure > config.critical_pressure {
        causes.push(DamageCause::Pressure);
    }
    if dry_core {
        causes.push(DamageCause::DryCore);
    }

    let mut events = Vec::new();
    if !causes.is_empty() {
        next.damaged = true;
    }
    let energy_produced = if active && !next.damaged {
        next.power / ENERGY_DIVISOR
    } else {
        0.0
    };
    let now_active = fission_active(&next);
    if !was_active && now_active {
        events.push(PlantEvent::FissionStarted);
    } else if was_active && !now_active {
        events.push(PlantEvent::FissionStopped);
    }
    if !causes.is_empty() {
        events.push(PlantEvent::DamageOccurred { causes });
    }
    if !next.damaged && next.water_level <= config.low_water_threshold {
        events.push(PlantEvent::LowWaterWarning);
    }

    next.step_index += 1;
    next.energy_total += energy_produced;
    Ok(StepOutcome {
        next_state: next,
        energy_produced,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running(config: &PlantConfig) -> PlantState {
        let mut s = new_plant(config).unwrap();
        s.rods.fuel = TwoLevel::Down;
        s
    }

    #[test]
    fn initial_state() {
        let cfg = PlantConfig::default();
        let s = new_plant(&cfg).unwrap();
        assert_eq!(s.water_level, 100.0);
        assert_eq!(s.power, 0.0);
        assert!(!s.damaged);
        assert_eq!(s.rods, RodBank::default());
        assert_eq!(s.step_index, 0);
        assert!(!fission_active(&s));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = PlantConfig::default();
        cfg.regulatory_rates.up = cfg.regulatory_rates.medium;
        assert!(matches!(new_plant(&cfg), Err(PlantError::InvalidConfig { .. })));
    }

    #[test]
    fn fission_preconditions() {
        let cfg = PlantConfig::default();
        let mut s = running(&cfg);
        s.water_level = 50.0;
        assert!(fission_active(&s));
        let out = apply_action(&s, Action::Skip, &cfg).unwrap();
        assert!(out.energy_produced > 0.0);

        s.rods.security = TwoLevel::Down;
        assert!(!fission_active(&s));
        s.rods.security = TwoLevel::Up;
        s.damaged = true;
        assert!(!fission_active(&s));
        s.damaged = false;
        s.water_level = 0.0;
        assert!(!fission_active(&s));
    }

    #[test]
    fn full_power_step_yields_power_over_360() {
        let cfg = PlantConfig::default();
        let mut s = running(&cfg);
        s.power = 1000.0;
        let out = apply_action(&s, Action::Skip, &cfg).unwrap();
        assert!((out.energy_produced - 1000.0 / 360.0).abs() < 1e-12);
        assert_eq!(out.next_state.power, 1000.0);
    }

    #[test]
    fn security_down_stops_fission_and_cools() {
        let cfg = PlantConfig::default();
        let mut s = running(&cfg);
        s.temperature = 500.0;
        s.pressure = 200.0;
        s.power = 400.0;
        s.rods.security = TwoLevel::Down;
        let out = apply_action(&s, Action::Skip, &cfg).unwrap();
        assert_eq!(out.energy_produced, 0.0);
        assert!(out.next_state.temperature < s.temperature);
        assert!(out.next_state.pressure < s.pressure);
        assert_eq!(out.next_state.water_level, s.water_level);
        assert_eq!(out.next_state.power, 400.0 - cfg.fuel_depletion.up);
    }

    #[test]
    fn lowering_regulatory_rods_accelerates() {
        let cfg = PlantConfig::default();
        let mut s = running(&cfg);
        s.water_level = 80.0;
        s.temperature = 200.0;
        let down = apply_action(&s, Action::RegulatoryDown, &cfg).unwrap().next_state;
        let up = apply_action(&s, Action::RegulatoryUp, &cfg).unwrap().next_state;
        assert!(down.temperature - s.temperature > up.temperature - s.temperature);
        assert!(down.pressure - s.pressure > up.pressure - s.pressure);
        assert!(down.water_level - s.water_level < up.water_level - s.water_level);
        assert!(down.power > up.power);
    }

    #[test]
    fn add_water_clamps_at_full() {
        let cfg = PlantConfig::default();
        let mut s = new_plant(&cfg).unwrap();
        s.water_level = 95.0;
        let out = apply_action(&s, Action::AddWater, &cfg).unwrap();
        assert_eq!(out.next_state.water_level, 100.0);
    }

    #[test]
    fn water_runs_out_then_dry_core_damages() {
        let cfg = PlantConfig::default();
        let mut s = running(&cfg);
        s.rods.regulatory = RodLevel::Medium;
        s.water_level = cfg.regulatory_rates.medium * cfg.water_step;
        let first = apply_action(&s, Action::Skip, &cfg).unwrap();
        assert_eq!(first.next_state.water_level, 0.0);
        assert!(!first.damaged());
        assert!(first.energy_produced > 0.0);
        assert!(first.events.contains(&PlantEvent::FissionStopped));

        let second = apply_action(&first.next_state, Action::Skip, &cfg).unwrap();
        assert!(second.damaged());
        assert_eq!(second.primary_damage_cause(), Some(DamageCause::DryCore));
        assert_eq!(second.energy_produced, 0.0);
    }

    #[test]
    fn refilling_an_empty_generator_avoids_damage() {
        let cfg = PlantConfig::default();
        let mut s = running(&cfg);
        s.water_level = 0.0;
        let out = apply_action(&s, Action::AddWater, &cfg).unwrap();
        assert!(!out.damaged());
        assert!(out.energy_produced >= 0.0);
    }

    #[test]
    fn simultaneous_causes_report_temperature_first() {
        let cfg = PlantConfig::default();
        let mut s = running(&cfg);
        s.rods.regulatory = RodLevel::Down;
        s.temperature = 890.0;
        s.pressure = 445.0;
        let out = apply_action(&s, Action::Skip, &cfg).unwrap();
        assert_eq!(
            out.events.iter().find(|e| matches!(e, PlantEvent::DamageOccurred { .. })),
            Some(&PlantEvent::DamageOccurred {
                causes: vec![DamageCause::Temperature, DamageCause::Pressure]
            })
        );
        assert_eq!(out.primary_damage_cause(), Some(DamageCause::Temperature));
    }

    #[test]
    fn terminal_states_reject_actions() {
        let cfg = PlantConfig::default();
        let mut s = new_plant(&cfg).unwrap();
        s.damaged = true;
        assert_eq!(
            apply_action(&s, Action::Skip, &cfg),
            Err(PlantError::Terminal(TerminalReason::Damaged))
        );
        let mut s = new_plant(&cfg).unwrap();
        s.step_index = cfg.episode_steps;
        assert_eq!(
            apply_action(&s, Action::Skip, &cfg),
            Err(PlantError::Terminal(TerminalReason::EpisodeOver))
        );
    }

    #[test]
    fn feature_encoding() {
        let cfg = PlantConfig::default();
        let mut s = new_plant(&cfg).unwrap();
        assert_eq!(s.feature_vector(), [25.0, 1.0, 100.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        s.rods.sustain = RodLevel::Medium;
        assert_eq!(s.feature_vector()[6], 1.0);
        s.rods.fuel = TwoLevel::Down;
        assert_eq!(s.feature_vector()[5], 2.0);
        assert!(PlantState::from_feature_vector(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn snapshot_json_field_order_is_fixed() {
        let s = new_plant(&PlantConfig::default()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"temperature":25.0,"pressure":1.0,"water_level":100.0,"power":0.0,"rods":{"security":"up","fuel":"up","sustain":"up","regulatory":"up"},"step_index":0,"damaged":false,"energy_total":0.0}"#
        );
    }
}
