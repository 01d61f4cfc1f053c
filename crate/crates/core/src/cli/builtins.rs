//! Named built-in scenarios, shipped as TOML files under `scenarios/`.

use super::scenario::{Scenario, ScenarioError};

const SOURCES: [(&str, &str); 7] = [
    ("pseudosphere-divergence", include_str!("../../scenarios/pseudosphere-divergence.toml")),
    ("telescope-trap", include_str!("../../scenarios/telescope-trap.toml")),
    ("sphere-sync", include_str!("../../scenarios/sphere-sync.toml")),
    ("ellipsoid-zhu-conjugacy", include_str!("../../scenarios/ellipsoid-zhu-conjugacy.toml")),
    ("kuramoto-circle", include_str!("../../scenarios/kuramoto-circle.toml")),
    ("mexican-hat-reduction", include_str!("../../scenarios/mexican-hat-reduction.toml")),
    ("antipodal-equilibria", include_str!("../../scenarios/antipodal-equilibria.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(name, _)| *name)
}

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let text = source(name).ok_or_else(|| ScenarioError::UnknownScenario(name.into()))?;
    Scenario::from_toml(text)
}

/// `(name, description)` for every built-in.
pub fn list_scenarios() -> Vec<(String, String)> {
    names()
        .map(|name| {
            let s = builtin(name).expect("built-in scenarios parse");
            (s.name, s.description)
        })
        .collect()
}
