use std::fmt;

use serde::{Deserialize, Serialize};

use super::Feature;

/// One of the twelve control-panel commands.
///
/// Serialized as its stable integer id (0..=11); the order below is the id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    SecurityUp,
    SecurityDown,
    FuelUp,
    FuelDown,
    SustainUp,
    SustainMedium,
    SustainDown,
    RegulatoryUp,
    RegulatoryMedium,
    RegulatoryDown,
    AddWater,
    Skip,
}

pub const NUM_ACTIONS: usize = 12;

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::SecurityUp,
        Action::SecurityDown,
        Action::FuelUp,
        Action::FuelDown,
        Action::SustainUp,
        Action::SustainMedium,
        Action::SustainDown,
        Action::RegulatoryUp,
        Action::RegulatoryMedium,
        Action::RegulatoryDown,
        Action::AddWater,
        Action::Skip,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_id(id: u8) -> Option<Action> {
        Action::ALL.get(id as usize).copied()
    }

    /// Snake-case key used on the command line and in config files.
    pub fn key(self) -> &'static str {
        match self {
            Action::SecurityUp => "security_up",
            Action::SecurityDown => "security_down",
            Action::FuelUp => "fuel_up",
            Action::FuelDown => "fuel_down",
            Action::SustainUp => "sustain_up",
            Action::SustainMedium => "sustain_medium",
            Action::SustainDown => "sustain_down",
            Action::RegulatoryUp => "regulatory_up",
            Action::RegulatoryMedium => "regulatory_medium",
            Action::RegulatoryDown => "regulatory_down",
            Action::AddWater => "add_water",
            Action::Skip => "skip",
        }
    }

    pub fn from_key(key: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.key() == key)
    }

    /// Verb phrase used by the advisor ("I would <phrase>").
    pub fn phrase(self) -> &'static str {
        match self {
            Action::SecurityUp => "raise the security rods",
            Action::SecurityDown => "lower the security rods",
            Action::FuelUp => "raise the fuel rods",
            Action::FuelDown => "lower the fuel rods",
            Action::SustainUp => "raise the sustain rods",
            Action::SustainMedium => "set the sustain rods to medium",
            Action::SustainDown => "lower the sustain rods",
            Action::RegulatoryUp => "raise the regulatory rods",
            Action::RegulatoryMedium => "set the regulatory rods to medium",
            Action::RegulatoryDown => "lower the regulatory rods",
            Action::AddWater => "add water to the steam generator",
            Action::Skip => "skip to the next step",
        }
    }

    /// The feature this action primarily acts on. Skip has no direct effect,
    /// so it is attributed to the reactor power, which keeps evolving.
    pub fn primary_feature(self) -> Feature {
        match self {
            Action::SecurityUp | Action::SecurityDown => Feature::SecurityRods,
            Action::FuelUp | Action::FuelDown => Feature::FuelRods,
            Action::SustainUp | Action::SustainMedium | Action::SustainDown => Feature::SustainRods,
            Action::RegulatoryUp | Action::RegulatoryMedium | Action::RegulatoryDown => {
                Feature::RegulatoryRods
            }
            Action::AddWater => Feature::WaterLevel,
            Action::Skip => Feature::Power,
        }
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.id()
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(id: u8) -> Result<Self, Self::Error> {
        Action::from_id(id).ok_or_else(|| format!("action id {id} out of range 0..=11"))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}
