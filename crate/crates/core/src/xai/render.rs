//! Sentence templates for suggestions and explanations.

use super::XaiError;
use crate::plant::{Action, Feature};
use crate::tree::Direction;

fn continuous_label(feature: Feature) -> (&'static str, &'static str) {
    match feature {
        Feature::Temperature => ("the water temperature in the core", " °C"),
        Feature::Pressure => ("the pressure in the reactor's core", " bar"),
        Feature::WaterLevel => ("the water level in the steam generator", ""),
        Feature::Power => ("the reactor's power", " MW"),
        _ => unreachable!("rod features are rendered by level"),
    }
}

fn rod_label(feature: Feature) -> &'static str {
    match feature {
        Feature::SecurityRods => "the security rods",
        Feature::FuelRods => "the fuel rods",
        Feature::SustainRods => "the sustain rods",
        Feature::RegulatoryRods => "the regulatory rods",
        _ => unreachable!("continuous features are rendered numerically"),
    }
}

fn level_name(code: f64) -> &'static str {
    match code {
        c if c == 0.0 => "up",
        c if c == 1.0 => "medium",
        _ => "down",
    }
}

/// Shortest decimal rendering, at most two decimals.
pub fn format_value(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// The bare condition, e.g. "the water level in the steam generator is ≤ 25".
pub fn render_condition(
    feature_index: usize,
    direction: Direction,
    value: f64,
) -> Result<String, XaiError> {
    let feature = Feature::from_index(feature_index).ok_or(XaiError::UnknownFeature(feature_index))?;
    if !feature.is_rod() {
        let (name, unit) = continuous_label(feature);
        return Ok(format!(
            "{name} is {} {}{unit}",
            direction.symbol(),
            format_value(value)
        ));
    }
    let levels: Vec<&str> = feature
        .rod_levels()
        .iter()
        .filter(|&&l| Direction::of(l, value) == direction)
        .map(|&l| level_name(l))
        .collect();
    let name = rod_label(feature);
    Ok(match levels.as_slice() {
        [] => format!("{name} are {} {}", direction.symbol(), format_value(value)),
        [one] => format!("{name} are {one}"),
        many => format!("{name} are {}", many.join(" or ")),
    })
}

/// Explanation sentence. With a foil, the sentence is contrastive.
pub fn render_explanation(
    feature_index: usize,
    direction: Direction,
    value: f64,
    foil: Option<Action>,
) -> Result<String, XaiError> {
    let condition = render_condition(feature_index, direction, value)?;
    Ok(match foil {
        Some(foil) => format!(
            "because {condition} — that is why I would not {}",
            foil.phrase()
        ),
        None => format!("because {condition}"),
    })
}

pub const NO_CONDITION_TEXT: &str = "no conditions were tested";

pub fn render_suggestion(action: Action) -> String {
    format!("I would {}", action.phrase())
}
