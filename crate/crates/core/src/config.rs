//! Configuration files: TOML with `[plant]`, `[gains]`, `[scenario]` and
//! `[controller]` sections. Every key is optional and defaults to the
//! canonical value; unknown sections or keys are rejected with their line.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::controllers::ControllerGains;
use crate::model::{DisturbanceSpec, PlantState, ReactiveDisturbanceForm, RectifierParams};
use crate::scenario::{Profile, ScenarioProfile};
use crate::sim::{ControllerKind, SimConfig};

/// Fixed 200 Ω load, BSC controller.
pub const CANONICAL: &str = include_str!("../configs/canonical.toml");
/// Load stepping 200 → 100 Ω at 1 s, adaptive controller.
pub const CANONICAL_LOAD_STEP: &str = include_str!("../configs/canonical_load_step.toml");

const PLANT_KEYS: &[&str] = &[
    "phase_voltage_rms",
    "frequency",
    "inductance",
    "source_resistance",
    "capacitance",
    "nominal_load",
];
const GAIN_KEYS: &[&str] = &[
    "k_v",
    "k_s",
    "k_q",
    "rho_p",
    "rho_q",
    "gamma",
    "disturbance_mode",
    "adaptation_variant",
    "up_estimate_source",
];
const SCENARIO_KEYS: &[&str] = &[
    "duration", "step_size", "v_ref", "q_ref", "load", "delta_a", "delta_b", "delta_c", "delta_d", "g_form",
];
const CONTROLLER_KEYS: &[&str] =
    &["kind", "initial_state", "initial_estimate", "freeze_estimate", "duty_clamp"];

/// Numeric keys accepted by [`ConfigFile::set_numeric`].
pub const SWEEPABLE: &[&str] = &[
    "gains.k_v",
    "gains.k_s",
    "gains.k_q",
    "gains.gamma",
    "gains.rho_p",
    "gains.rho_q",
    "scenario.step_size",
    "scenario.duration",
    "scenario.load_final",
    "plant.nominal_load",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("unknown section [{section}] at line {line}")]
    UnknownSection { section: String, line: usize },
    #[error("unknown key `{key}` in section [{section}] at line {line}")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("invalid value in section [{section}]: {message}")]
    Invalid { section: String, message: String },
    #[error("`{0}` is not a sweepable parameter (expected one of: {list})", list = SWEEPABLE.join(", "))]
    NotSweepable(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub duration: f64,
    pub step_size: f64,
    pub v_ref: Profile,
    pub q_ref: Profile,
    pub load: Profile,
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub delta_d: f64,
    pub g_form: ReactiveDisturbanceForm,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioProfile::default();
        ScenarioSection {
            duration: s.duration,
            step_size: s.step_size,
            v_ref: s.v_ref,
            q_ref: s.q_ref,
            load: s.load,
            delta_a: 0.0,
            delta_b: 0.0,
            delta_c: 0.0,
            delta_d: 0.0,
            g_form: ReactiveDisturbanceForm::State,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    /// `[x_p, P, Q]`
    pub initial_state: [f64; 3],
    pub initial_estimate: Option<f64>,
    pub freeze_estimate: bool,
    pub duty_clamp: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub plant: RectifierParams,
    pub gains: ControllerGains,
    pub scenario: ScenarioSection,
    pub controller: ControllerSection,
}

/// Line (1-based) where `key` is assigned inside `[section]`, or where the
/// section header appears when `key` is `None`.
fn locate(text: &str, section: &str, key: Option<&str>) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[') {
            current = header.trim_end_matches(']').trim().to_string();
            if key.is_none() && current == section {
                return i + 1;
            }
            continue;
        }
        if let Some(k) = key {
            if current == section {
                if let Some(rest) = line.strip_prefix(k) {
                    if rest.trim_start().starts_with('=') {
                        return i + 1;
                    }
                }
            }
        }
    }
    0
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        for (section, value) in &table {
            let allowed = match section.as_str() {
                "plant" => PLANT_KEYS,
                "gains" => GAIN_KEYS,
                "scenario" => SCENARIO_KEYS,
                "controller" => CONTROLLER_KEYS,
                _ => {
                    return Err(ConfigError::UnknownSection {
                        section: section.clone(),
                        line: locate(text, section, None),
                    })
                }
            };
            let Some(inner) = value.as_table() else {
                return Err(ConfigError::Invalid {
                    section: section.clone(),
                    message: "expected a table".into(),
                });
            };
            for key in inner.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(ConfigError::UnknownKey {
                        section: section.clone(),
                        key: key.clone(),
                        line: locate(text, section, Some(key)),
                    });
                }
            }
        }
        // keys are known, so remaining failures are type or value errors
        let section_of = |name: &str| -> Result<toml::Value, ConfigError> {
            Ok(table.get(name).cloned().unwrap_or_else(|| toml::Value::Table(Default::default())))
        };
        fn typed<T: serde::de::DeserializeOwned>(name: &str, v: toml::Value) -> Result<T, ConfigError> {
            v.try_into().map_err(|e: toml::de::Error| ConfigError::Invalid {
                section: name.to_string(),
                message: e.message().to_string(),
            })
        }
        Ok(ConfigFile {
            plant: typed("plant", section_of("plant")?)?,
            gains: typed("gains", section_of("gains")?)?,
            scenario: typed("scenario", section_of("scenario")?)?,
            controller: typed("controller", section_of("controller")?)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn canonical() -> Self {
        Self::parse(CANONICAL).expect("bundled canonical config parses")
    }

    pub fn canonical_load_step() -> Self {
        Self::parse(CANONICAL_LOAD_STEP).expect("bundled load-step config parses")
    }

    pub fn to_sim_config(&self) -> SimConfig {
        let s = &self.scenario;
        let [x_p, p, q] = self.controller.initial_state;
        SimConfig {
            params: self.plant,
            gains: self.gains,
            scenario: ScenarioProfile {
                duration: s.duration,
                step_size: s.step_size,
                v_ref: s.v_ref.clone(),
                q_ref: s.q_ref.clone(),
                load: s.load.clone(),
                disturbance: DisturbanceSpec {
                    delta_a: s.delta_a,
                    delta_b: s.delta_b,
                    delta_c: s.delta_c,
                    delta_d: s.delta_d,
                    g_form: s.g_form,
                },
            },
            controller: self.controller.kind,
            initial_state: PlantState::new(x_p, p, q),
            initial_estimate: self.controller.initial_estimate,
            freeze_estimate: self.controller.freeze_estimate,
            duty_clamp: self.controller.duty_clamp.map(|[lo, hi]| (lo, hi)),
        }
    }

    /// Overwrites one of the [`SWEEPABLE`] keys.
    pub fn set_numeric(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        match name {
            "gains.k_v" => self.gains.k_v = value,
            "gains.k_s" => self.gains.k_s = value,
            "gains.k_q" => self.gains.k_q = value,
            "gains.gamma" => self.gains.gamma = value,
            "gains.rho_p" => self.gains.rho_p = value,
            "gains.rho_q" => self.gains.rho_q = value,
            "scenario.step_size" => self.scenario.step_size = value,
            "scenario.duration" => self.scenario.duration = value,
            "scenario.load_final" => {
                if let Some(last) = self.scenario.load.0.last_mut() {
                    last.1 = value;
                }
            }
            "plant.nominal_load" => self.plant.nominal_load = value,
            _ => return Err(ConfigError::NotSweepable(name.to_string())),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{AdaptationVariant, DisturbanceMode};

    #[test]
    fn canonical_matches_builtin_defaults() {
        let c = ConfigFile::canonical();
        assert_eq!(c, ConfigFile::default());
        let sim = c.to_sim_config();
        assert_eq!(sim, SimConfig::default());
    }

    #[test]
    fn load_step_file() {
        let c = ConfigFile::canonical_load_step();
        assert_eq!(c.controller.kind, ControllerKind::Adaptive);
        assert_eq!(c.scenario.load.entries(), &[(0.0, 200.0), (1.0, 100.0)]);
        assert_eq!(c.gains.adaptation_variant, AdaptationVariant::Code);
    }

    #[test]
    fn unknown_key_names_section_and_line() {
        let text = "[plant]\nfrequency = 50.0\n\n[gains]\nk_v = 1.0\nkx = 2.0\n";
        let err = ConfigFile::parse(text).unwrap_err();
        match &err {
            ConfigError::UnknownKey { section, key, line } => {
                assert_eq!((section.as_str(), key.as_str(), *line), ("gains", "kx", 6));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("[gains]") && err.to_string().contains("kx"));
    }

    #[test]
    fn unknown_section_rejected() {
        let err = ConfigFile::parse("[plant]\n[solver]\norder = 4\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownSection { ref section, line: 2 } if section == "solver"));
    }

    #[test]
    fn type_errors_name_the_section() {
        let err = ConfigFile::parse("[gains]\ndisturbance_mode = \"sometimes\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref section, .. } if section == "gains"), "{err}");
        assert!(matches!(ConfigFile::parse("[gains\n"), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c = ConfigFile::parse("[gains]\ndisturbance_mode = \"robust-bound\"\n[controller]\nkind = \"adaptive\"\n").unwrap();
        assert_eq!(c.gains.disturbance_mode, DisturbanceMode::RobustBound);
        assert_eq!(c.gains.k_v, 500.0);
        assert_eq!(c.controller.kind, ControllerKind::Adaptive);
    }

    #[test]
    fn sweep_overrides() {
        let mut c = ConfigFile::canonical_load_step();
        c.set_numeric("gains.gamma", 1e-2).unwrap();
        c.set_numeric("scenario.load_final", 50.0).unwrap();
        assert_eq!(c.gains.gamma, 1e-2);
        assert_eq!(c.scenario.load.entries()[1], (1.0, 50.0));
        assert!(matches!(c.set_numeric("plant.colour", 1.0), Err(ConfigError::NotSweepable(_))));
    }
}
