//! Versioned JSON scenario format.
//!
//! Scenarios are fail-closed: the schema is versioned and unknown fields are
//! rejected, so a typo in a physics parameter surfaces as a load error
//! instead of silently running with a default.

use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use tendon_hand_sim::{
    calibrate_efficiency, default_hand, validate, ControllerConfig, GraspMode, GraspOptions,
    HandSpec, Obstacle, Vec2,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Grasp,
    Ramp,
    Margin,
    Validate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Mode::Grasp => "grasp",
            Mode::Ramp => "ramp",
            Mode::Margin => "margin",
            Mode::Validate => "validate",
        })
    }
}

/// Either the literal string `"default"` or a full inline hand description.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum HandField {
    Named(String),
    Inline(Box<HandSpec>),
}

impl Default for HandField {
    fn default() -> Self {
        HandField::Named("default".to_string())
    }
}

/// Controller parameters plus the grasp mode and per-actuator commands.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub k: f64,
    pub f_ref: f64,
    pub f_thre: f64,
    pub tolerance: f64,
    pub max_steps: usize,
    pub mode: GraspMode,
    /// Initial wire excursions (m) for force_track/length_hold or held
    /// tensions (N) for tension_hold; empty means all zero.
    pub commands: Vec<f64>,
    /// Which actuators the controller drives; empty means all.
    pub active: Vec<bool>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = ControllerConfig::default();
        ControllerSection {
            k: c.k,
            f_ref: c.f_ref,
            f_thre: c.f_thre,
            tolerance: c.tolerance,
            max_steps: c.max_steps,
            mode: GraspMode::ForceTrack,
            commands: Vec::new(),
            active: Vec::new(),
        }
    }
}

impl ControllerSection {
    pub fn config(&self) -> ControllerConfig {
        ControllerConfig {
            k: self.k,
            f_ref: self.f_ref,
            f_thre: self.f_thre,
            tolerance: self.tolerance,
            max_steps: self.max_steps,
        }
    }

    pub fn options(&self, actuator_count: usize) -> Result<GraspOptions, String> {
        let commands = if self.commands.is_empty() {
            vec![0.0; actuator_count]
        } else if self.commands.len() == actuator_count {
            self.commands.clone()
        } else {
            return Err(format!(
                "controller.commands: expected {actuator_count} entries, got {}",
                self.commands.len()
            ));
        };
        let active = if self.active.is_empty() {
            vec![true; actuator_count]
        } else if self.active.len() == actuator_count {
            self.active.clone()
        } else {
            return Err(format!(
                "controller.active: expected {actuator_count} entries, got {}",
                self.active.len()
            ));
        };
        Ok(GraspOptions { mode: self.mode, commands, active })
    }
}

/// A measured (mass held, peak wire tension) datapoint.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationPoint {
    pub mass_kg: f64,
    pub tension_kgf: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PayloadSection {
    /// Total payload for margin reports, kg.
    pub payload_mass: Option<f64>,
    pub hands_sharing: u32,
    /// Masses swept by ramp mode, kg.
    pub masses: Vec<f64>,
    /// kg per kgf; alternative to `calibration`.
    pub grip_efficiency: Option<f64>,
    pub calibration: Option<CalibrationPoint>,
    /// Unit direction the payload weight pulls along.
    pub load_direction: Vec2,
    /// Frozen per-actuator wire excursions during a ramp, m.
    pub grasp_excursions: Vec<f64>,
}

impl Default for PayloadSection {
    fn default() -> Self {
        PayloadSection {
            payload_mass: None,
            hands_sharing: 1,
            masses: Vec::new(),
            grip_efficiency: None,
            calibration: None,
            load_direction: Vec2::new(0.0, -1.0),
            grasp_excursions: Vec::new(),
        }
    }
}

impl PayloadSection {
    /// kg per kgf, from `grip_efficiency` directly or the calibration point.
    pub fn efficiency(&self) -> Result<f64, String> {
        if let Some(eta) = self.grip_efficiency {
            if !(eta > 0.0) {
                return Err(format!("payload.grip_efficiency: must be > 0, got {eta}"));
            }
            return Ok(eta);
        }
        match &self.calibration {
            Some(c) => calibrate_efficiency(c.mass_kg, c.tension_kgf)
                .map_err(|e| format!("payload.calibration: {e}")),
            None => Err(
                "payload: needs either \"grip_efficiency\" or a \"calibration\" datapoint"
                    .to_string(),
            ),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub mode: Mode,
    /// Recorded for reproducibility bookkeeping; the simulation itself is
    /// deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hand: HandField,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub controller: Option<ControllerSection>,
    #[serde(default)]
    pub payload: Option<PayloadSection>,
    /// CSV file name, relative to the output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, String> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| format!("scenario parse error: {e}"))?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version: this build reads version {SCHEMA_VERSION}, scenario declares {}",
                s.schema_version
            ));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read scenario {}: {e}", path.display()))?;
        Scenario::from_json(&text)
    }

    /// Resolves the hand description, validating inline specs.
    pub fn hand(&self) -> Result<HandSpec, String> {
        match &self.hand {
            HandField::Named(name) if name == "default" => Ok(default_hand()),
            HandField::Named(name) => Err(format!(
                "hand: unknown named hand {name:?}; use \"default\" or an inline spec"
            )),
            HandField::Inline(spec) => {
                let violations = validate(spec);
                if violations.is_empty() {
                    Ok((**spec).clone())
                } else {
                    let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                    Err(format!("hand: {}", list.join("; ")))
                }
            }
        }
    }

    /// Checks that the sections the declared mode needs are present and
    /// internally consistent. Errors name the offending field.
    pub fn check_sections(&self) -> Result<(), String> {
        match self.mode {
            Mode::Grasp => {
                if self.controller.is_none() {
                    return Err("controller: section required in grasp mode".to_string());
                }
            }
            Mode::Ramp => {
                let p = self
                    .payload
                    .as_ref()
                    .ok_or("payload: section required in ramp mode")?;
                if p.masses.is_empty() {
                    return Err("payload.masses: ramp mode needs at least one mass".to_string());
                }
                if p.grasp_excursions.is_empty() {
                    return Err(
                        "payload.grasp_excursions: ramp mode needs the frozen grasp commands"
                            .to_string(),
                    );
                }
            }
            Mode::Margin => {
                let p = self
                    .payload
                    .as_ref()
                    .ok_or("payload: section required in margin mode")?;
                if p.payload_mass.is_none() {
                    return Err("payload.payload_mass: required in margin mode".to_string());
                }
                p.efficiency()?;
            }
            Mode::Validate => {}
        }
        Ok(())
    }
}
