//! Numeric encoding of a plant state, as seen by the advisor's tree.
//!
//! Encoding version 1: `[T, P, L, power, security, fuel, sustain, regulatory]`,
//! rod levels encoded Up=0, Medium=1, Down=2 (two-level rods use 0 and 2).

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{PlantError, PlantState, RodBank, RodLevel, TwoLevel};

pub const NUM_FEATURES: usize = 8;
pub const FEATURE_ENCODING_VERSION: u32 = 1;

pub type FeatureVector = [f64; NUM_FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Temperature,
    Pressure,
    WaterLevel,
    Power,
    SecurityRods,
    FuelRods,
    SustainRods,
    RegulatoryRods,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::Temperature,
        Feature::Pressure,
        Feature::WaterLevel,
        Feature::Power,
        Feature::SecurityRods,
        Feature::FuelRods,
        Feature::SustainRods,
        Feature::RegulatoryRods,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Feature> {
        Feature::ALL.get(i).copied()
    }

    pub fn is_rod(self) -> bool {
        self.index() >= 4
    }

    /// Levels a rod feature can take, in encoded form.
    pub fn rod_levels(self) -> &'static [f64] {
        match self {
            Feature::SecurityRods | Feature::FuelRods => &[0.0, 2.0],
            Feature::SustainRods | Feature::RegulatoryRods => &[0.0, 1.0, 2.0],
            _ => &[],
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Feature::Temperature => "temperature",
            Feature::Pressure => "pressure",
            Feature::WaterLevel => "water_level",
            Feature::Power => "power",
            Feature::SecurityRods => "security_rods",
            Feature::FuelRods => "fuel_rods",
            Feature::SustainRods => "sustain_rods",
            Feature::RegulatoryRods => "regulatory_rods",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl RodLevel {
    pub fn code(self) -> f64 {
        match self {
            RodLevel::Up => 0.0,
            RodLevel::Medium => 1.0,
            RodLevel::Down => 2.0,
        }
    }

    fn from_code(v: f64) -> Option<RodLevel> {
        match v {
            x if x == 0.0 => Some(RodLevel::Up),
            x if x == 1.0 => Some(RodLevel::Medium),
            x if x == 2.0 => Some(RodLevel::Down),
            _ => None,
        }
    }
}

impl TwoLevel {
    pub fn code(self) -> f64 {
        match self {
            TwoLevel::Up => 0.0,
            TwoLevel::Down => 2.0,
        }
    }

    fn from_code(v: f64) -> Option<TwoLevel> {
        match v {
            x if x == 0.0 => Some(TwoLevel::Up),
            x if x == 2.0 => Some(TwoLevel::Down),
            _ => None,
        }
    }
}

impl PlantState {
    pub fn feature_vector(&self) -> FeatureVector {
        [
            self.temperature,
            self.pressure,
            self.water_level,
            self.power,
            self.rods.security.code(),
            self.rods.fuel.code(),
            self.rods.sustain.code(),
            self.rods.regulatory.code(),
        ]
    }

    /// Inverse of [`PlantState::feature_vector`]. Lifecycle fields (step,
    /// damage, accumulated energy) are not part of the encoding and come back
    /// at their initial values.
    pub fn from_feature_vector(fv: &FeatureVector) -> Result<PlantState, PlantError> {
        let bad = |f: Feature| PlantError::BadEncoding {
            feature: f,
            value: fv[f.index()],
        };
        for f in &Feature::ALL[..4] {
            if !fv[f.index()].is_finite() {
                return Err(bad(*f));
            }
        }
        let rods = RodBank {
            security: TwoLevel::from_code(fv[4]).ok_or_else(|| bad(Feature::SecurityRods))?,
            fuel: TwoLevel::from_code(fv[5]).ok_or_else(|| bad(Feature::FuelRods))?,
            sustain: RodLevel::from_code(fv[6]).ok_or_else(|| bad(Feature::SustainRods))?,
            regulatory: RodLevel::from_code(fv[7]).ok_or_else(|| bad(Feature::RegulatoryRods))?,
        };
        Ok(PlantState {
            temperature: fv[0],
            pressure: fv[1],
            water_level: fv[2],
            power: fv[3],
            rods,
            step_index: 0,
            damaged: false,
            energy_total: 0.0,
        })
    }
}
