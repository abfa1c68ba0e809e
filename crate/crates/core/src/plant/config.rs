use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PlantError, RodLevel};

pub const PLANT_CONFIG_SCHEMA: &str = "plant-config/v1";

/// Multipliers applied to the per-step increments, keyed by regulatory rod level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulatoryRates {
    pub up: f64,
    pub medium: f64,
    pub down: f64,
}

impl RegulatoryRates {
    pub fn at(&self, level: RodLevel) -> f64 {
        match level {
            RodLevel::Up => self.up,
            RodLevel::Medium => self.medium,
            RodLevel::Down => self.down,
        }
    }
}

/// Fuel de-potentiation (MW lost per step), keyed by sustain rod level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelDepletion {
    pub up: f64,
    pub medium: f64,
    pub down: f64,
}

impl FuelDepletion {
    pub fn at(&self, level: RodLevel) -> f64 {
        match level {
            RodLevel::Up => self.up,
            RodLevel::Medium => self.medium,
            RodLevel::Down => self.down,
        }
    }
}

/// Every tunable constant of the simulator. Loaded from TOML; the `schema`
/// key must equal [`PLANT_CONFIG_SCHEMA`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub schema: String,
    /// °C
    pub initial_temperature: f64,
    /// bar
    pub initial_pressure: f64,
    /// %
    pub initial_water_level: f64,
    pub max_temperature: f64,
    pub max_pressure: f64,
    pub critical_temperature: f64,
    pub critical_pressure: f64,
    pub temperature_step: f64,
    pub pressure_step: f64,
    pub water_step: f64,
    pub power_step: f64,
    pub regulatory_rates: RegulatoryRates,
    pub fuel_depletion: FuelDepletion,
    /// Fraction of the distance to the initial value recovered per idle step.
    pub cooling_factor: f64,
    pub water_refill: f64,
    pub step_seconds: f64,
    pub episode_steps: u32,
    pub low_water_threshold: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            schema: PLANT_CONFIG_SCHEMA.to_string(),
            initial_temperature: 25.0,
            initial_pressure: 1.0,
            initial_water_level: 100.0,
            max_temperature: 1000.0,
            max_pressure: 500.0,
            critical_temperature: 900.0,
            critical_pressure: 450.0,
            temperature_step: 30.0,
            pressure_step: 10.0,
            water_step: 8.0,
            power_step: 100.0,
            regulatory_rates: RegulatoryRates {
                up: 0.5,
                medium: 1.0,
                down: 1.5,
            },
            fuel_depletion: FuelDepletion {
                up: 10.0,
                medium: 6.0,
                down: 3.0,
            },
            cooling_factor: 0.2,
            water_refill: 20.0,
            step_seconds: 10.0,
            episode_steps: 60,
            low_water_threshold: 25.0,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> PlantError {
    PlantError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl PlantConfig {
    pub fn from_toml_str(s: &str) -> Result<PlantConfig, PlantError> {
        let cfg: PlantConfig =
            toml::from_str(s).map_err(|e| PlantError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PlantConfig, PlantError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PlantError::ConfigParse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plant config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if self.schema != PLANT_CONFIG_SCHEMA {
            return Err(invalid(
                "schema",
                format!("expected {PLANT_CONFIG_SCHEMA:?}, found {:?}", self.schema),
            ));
        }
        let finite = [
            ("initial_temperature", self.initial_temperature),
            ("initial_pressure", self.initial_pressure),
            ("initial_water_level", self.initial_water_level),
            ("max_temperature", self.max_temperature),
            ("max_pressure", self.max_pressure),
            ("critical_temperature", self.critical_temperature),
            ("critical_pressure", self.critical_pressure),
            ("temperature_step", self.temperature_step),
            ("pressure_step", self.pressure_step),
            ("water_step", self.water_step),
            ("power_step", self.power_step),
            ("cooling_factor", self.cooling_factor),
            ("water_refill", self.water_refill),
            ("step_seconds", self.step_seconds),
            ("low_water_threshold", self.low_water_threshold),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if !(self.initial_temperature < self.critical_temperature
            && self.critical_temperature < self.max_temperature)
        {
            return Err(invalid(
                "critical_temperature",
                "must lie strictly between initial_temperature and max_temperature",
            ));
        }
        if !(self.initial_pressure < self.critical_pressure
            && self.critical_pressure < self.max_pressure)
        {
            return Err(invalid(
                "critical_pressure",
                "must lie strictly between initial_pressure and max_pressure",
            ));
        }
        if !(self.initial_water_level > 0.0 && self.initial_water_level <= 100.0) {
            return Err(invalid("initial_water_level", "must be in (0, 100]"));
        }
        if !(self.low_water_threshold > 0.0 && self.low_water_threshold < 100.0) {
            return Err(invalid("low_water_threshold", "must be in (0, 100)"));
        }
        let r = self.regulatory_rates;
        if !(r.up > 0.0) {
            return Err(invalid("regulatory_rates.up", "must be > 0"));
        }
        if !(r.medium > r.up) {
            return Err(invalid("regulatory_rates.medium", "must be > regulatory_rates.up"));
        }
        if !(r.down > r.medium) {
            return Err(invalid("regulatory_rates.down", "must be > regulatory_rates.medium"));
        }
        let d = self.fuel_depletion;
        for (field, v) in [
            ("fuel_depletion.up", d.up),
            ("fuel_depletion.medium", d.medium),
            ("fuel_depletion.down", d.down),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(field, "must be finite and >= 0"));
            }
        }
        for (field, v) in [
            ("temperature_step", self.temperature_step),
            ("pressure_step", self.pressure_step),
            ("water_step", self.water_step),
            ("power_step", self.power_step),
            ("water_refill", self.water_refill),
            ("step_seconds", self.step_seconds),
        ] {
            if !(v > 0.0) {
                return Err(invalid(field, "must be > 0"));
            }
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor <= 1.0) {
            return Err(invalid("cooling_factor", "must be in (0, 1]"));
        }
        if self.episode_steps == 0 {
            return Err(invalid("episode_steps", "must be >= 1"));
        }
        Ok(())
    }

    /// Clamping range of each continuous feature, in feature-vector order.
    pub fn continuous_bounds(&self) -> [(f64, f64); 4] {
        [
            (self.initial_temperature, self.max_temperature),
            (self.initial_pressure, self.max_pressure),
            (0.0, 100.0),
            (0.0, super::MAX_POWER_MW),
        ]
    }

    /// Closed range of every feature, rods included.
    pub fn feature_bounds(&self) -> [(f64, f64); super::NUM_FEATURES] {
        let c = self.continuous_bounds();
        [c[0], c[1], c[2], c[3], (0.0, 2.0), (0.0, 2.0), (0.0, 2.0), (0.0, 2.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        PlantConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PlantConfig::default();
        let back = PlantConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_wrong_schema() {
        let mut cfg = PlantConfig::default();
        cfg.schema = "plant-config/v0".into();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, PlantError::InvalidConfig { field: "schema", .. }));
    }

    #[test]
    fn rejects_unordered_regulatory_rates() {
        let mut cfg = PlantConfig::default();
        cfg.regulatory_rates.up = 1.0;
        match cfg.validate().unwrap_err() {
            PlantError::InvalidConfig { field, .. } => assert_eq!(field, "regulatory_rates.medium"),
            e => panic!("unexpected {e}"),
        }
        let mut cfg = PlantConfig::default();
        cfg.regulatory_rates.down = 0.9;
        assert!(matches!(
            cfg.validate(),
            Err(PlantError::InvalidConfig { field: "regulatory_rates.down", .. })
        ));
    }

    #[test]
    fn rejects_threshold_outside_clamp_range() {
        let mut cfg = PlantConfig::default();
        cfg.critical_temperature = 1000.0;
        assert!(matches!(
            cfg.validate(),
            Err(PlantError::InvalidConfig { field: "critical_temperature", .. })
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("bogus = 1\n{}", PlantConfig::default().to_toml_string());
        assert!(matches!(
            PlantConfig::from_toml_str(&text),
            Err(PlantError::ConfigParse(_))
        ));
    }
}
