//! Threshold-gated force-feedback wire-length control.
//!
//! Each control step picks a feedback force per actuator from the fingertip
//! sensors (pairs average only the fingertips judged to be in contact),
//! then moves the commanded wire length by `delta_l = k * (F_finger - F_ref)`.
//! Positive `delta_l` releases the wire, so excess force unwinds itself.

use crate::contact::{Obstacle, SensorReading};
use crate::error::{Result, SimError};
use crate::hand_model::{ActuatorSpec, HandSpec};
use crate::solver::{solve_hand, FingerLoads, HandCommand, HandState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Wire-length feedback gain, m per N.
    pub k: f64,
    /// Force setpoint, N.
    pub f_ref: f64,
    /// Contact-judgement threshold, N.
    pub f_thre: f64,
    /// Convergence band around `f_ref`, N.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            k: 1e-3,
            f_ref: 10.0,
            f_thre: 5.0,
            tolerance: 0.5,
            max_steps: 200,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(SimError::InvalidSpec(format!("controller k must be > 0, got {}", self.k)));
        }
        if !(self.f_thre >= 0.0) {
            return Err(SimError::InvalidSpec(format!(
                "controller f_thre must be >= 0, got {}",
                self.f_thre
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(SimError::InvalidSpec(format!(
                "controller tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Per-actuator commanded wire excursions (drawn in past rest), m.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerState {
    pub commanded_excursions: Vec<f64>,
    pub step: usize,
    /// Per-step feedback force per actuator, N.
    pub history: Vec<Vec<f64>>,
}

impl ControllerState {
    pub fn new(initial_excursions: Vec<f64>) -> Self {
        ControllerState { commanded_excursions: initial_excursions, step: 0, history: Vec::new() }
    }
}

/// Picks the feedback force for one actuator from the fingertip readings.
///
/// Single-finger actuators use that fingertip directly. Paired actuators
/// average when both (or neither) fingertip is judged in contact, and take
/// the single contacting fingertip otherwise — without the gate, one finger
/// would press with twice the reference force whenever its partner misses
/// the object.
pub fn select_feedback_force(
    actuator: &ActuatorSpec,
    readings: &[SensorReading],
    f_thre: f64,
) -> f64 {
    let tip = |i: usize| readings[actuator.driven_fingers[i].index()].force;
    match actuator.driven_fingers.len() {
        1 => tip(0),
        2 => {
            let (f1, f2) = (tip(0), tip(1));
            match (f1 >= f_thre, f2 >= f_thre) {
                (true, true) | (false, false) => 0.5 * (f1 + f2),
                (true, false) => f1,
                (false, true) => f2,
            }
        }
        n => panic!("actuator {} drives {n} fingers; expected 1 or 2", actuator.id),
    }
}

/// One synchronous control step: wire-length update per active actuator.
/// Returns the updated state; inactive actuators hold their command.
pub fn control_step(
    spec: &HandSpec,
    config: &ControllerConfig,
    state: &ControllerState,
    readings: &[SensorReading],
    active: &[bool],
) -> ControllerState {
    let feedback: Vec<f64> = spec
        .actuators
        .iter()
        .map(|a| select_feedback_force(a, readings, config.f_thre))
        .collect();
    let mut next = state.clone();
    for (i, _) in spec.actuators.iter().enumerate() {
        if active[i] {
            let delta_l = config.k * (feedback[i] - config.f_ref);
            // Positive delta_l pays wire out; the drawn-in excursion can
            // never go negative (a slack wire cannot push).
            next.commanded_excursions[i] = (state.commanded_excursions[i] - delta_l).max(0.0);
        }
    }
    next.step += 1;
    next.history.push(feedback);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspMode {
    /// Iterate feedback + equilibrium until every active feedback force is
    /// within tolerance of the reference.
    ForceTrack,
    /// Freeze commanded wire lengths (excursions) and solve.
    LengthHold,
    /// Freeze actuator tensions and solve.
    TensionHold,
}

#[derive(Debug, Clone)]
pub struct GraspOptions {
    pub mode: GraspMode,
    /// Initial excursion commands (ForceTrack/LengthHold) or tensions
    /// (TensionHold), one per actuator.
    pub commands: Vec<f64>,
    /// Which actuators the controller drives; inactive ones hold.
    pub active: Vec<bool>,
}

impl GraspOptions {
    pub fn force_track(spec: &HandSpec) -> Self {
        GraspOptions {
            mode: GraspMode::ForceTrack,
            commands: vec![0.0; spec.actuators.len()],
            active: vec![true; spec.actuators.len()],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraspStep {
    /// Commands in effect when this state was solved.
    pub commands: Vec<f64>,
    pub state: HandState,
    /// Feedback force per actuator, N.
    pub feedback: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraspResult {
    pub steps: Vec<GraspStep>,
    pub converged: bool,
}

impl GraspResult {
    pub fn last(&self) -> &GraspStep {
        self.steps.last().expect("trajectory never empty")
    }
}

/// Runs a grasp scenario to (attempted) convergence and returns the full
/// state trajectory. Non-convergence is reported in the result, never
/// silently dropped; hard solver failures propagate as errors.
pub fn run_grasp(
    spec: &HandSpec,
    obstacles: &[Obstacle],
    config: &ControllerConfig,
    options: &GraspOptions,
) -> Result<GraspResult> {
    config.validate()?;
    if options.commands.len() != spec.actuators.len()
        || options.active.len() != spec.actuators.len()
    {
        return Err(SimError::Domain(format!(
            "expected {} commands and active flags",
            spec.actuators.len()
        )));
    }
    let loads = FingerLoads::default();

    let feedback_of = |state: &HandState| -> Vec<f64> {
        spec.actuators
            .iter()
            .map(|a| select_feedback_force(a, &state.sensors, config.f_thre))
            .collect()
    };

    match options.mode {
        GraspMode::LengthHold | GraspMode::TensionHold => {
            let command = match options.mode {
                GraspMode::LengthHold => HandCommand::Excursions(options.commands.clone()),
                _ => HandCommand::Tensions(options.commands.clone()),
            };
            let state = solve_hand(spec, &command, obstacles, &loads)?;
            let converged = state.diagnostics.converged;
            let feedback = feedback_of(&state);
            Ok(GraspResult {
                steps: vec![GraspStep { commands: options.commands.clone(), state, feedback }],
                converged,
            })
        }
        GraspMode::ForceTrack => {
            let mut ctrl = ControllerState::new(options.commands.clone());
            let mut steps = Vec::new();
            let mut converged = false;
            for _ in 0..config.max_steps {
                let command = HandCommand::Excursions(ctrl.commanded_excursions.clone());
                let state = solve_hand(spec, &command, obstacles, &loads)?;
                let feedback = feedback_of(&state);
                let done = state.diagnostics.converged
                    && spec
                        .actuators
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| options.active[*i])
                        .all(|(i, _)| (feedback[i] - config.f_ref).abs() <= config.tolerance);
                let readings = state.sensors.clone();
                steps.push(GraspStep {
                    commands: ctrl.commanded_excursions.clone(),
                    state,
                    feedback,
                });
                if done {
                    converged = true;
                    break;
                }
                ctrl = control_step(spec, config, &ctrl, &readings, &options.active);
            }
            Ok(GraspResult { steps, converged })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{SensorSite, SensorReading};
    use crate::hand_model::{default_hand, FingerName};

    fn readings(forces: [f64; 5]) -> Vec<SensorReading> {
        FingerName::ALL
            .iter()
            .enumerate()
            .map(|(i, &name)| SensorReading {
                site: SensorSite::Fingertip(name),
                force: forces[i],
                saturated: false,
            })
            .collect()
    }

    #[test]
    fn feedback_selection_covers_all_branches() {
        let hand = default_hand();
        let thumb = &hand.actuators[0];
        let pair = &hand.actuators[1]; // index + middle

        // thumb passes through
        let r = readings([7.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(select_feedback_force(thumb, &r, 5.0), 7.0);

        // both in contact: average
        let r = readings([0.0, 10.0, 6.0, 0.0, 0.0]);
        assert_eq!(select_feedback_force(pair, &r, 5.0), 8.0);

        // only first in contact: takes it alone (guards the 2x over-force)
        let r = readings([0.0, 10.0, 2.0, 0.0, 0.0]);
        assert_eq!(select_feedback_force(pair, &r, 5.0), 10.0);

        // only second in contact
        let r = readings([0.0, 2.0, 10.0, 0.0, 0.0]);
        assert_eq!(select_feedback_force(pair, &r, 5.0), 10.0);

        // neither: average
        let r = readings([0.0, 2.0, 3.0, 0.0, 0.0]);
        assert_eq!(select_feedback_force(pair, &r, 5.0), 2.5);
    }

    #[test]
    fn control_step_signs_and_fixed_point() {
        let hand = default_hand();
        let config = ControllerConfig { k: 1e-3, f_ref: 10.0, ..Default::default() };
        let active = vec![true; 3];

        // F == F_ref everywhere: fixed point.
        let s0 = ControllerState::new(vec![0.005; 3]);
        let r = readings([10.0, 10.0, 10.0, 10.0, 10.0]);
        let s1 = control_step(&hand, &config, &s0, &r, &active);
        assert_eq!(s1.commanded_excursions, s0.commanded_excursions);

        // Excess force releases (excursion shrinks by k * 5 = 5 mm).
        let r = readings([15.0, 15.0, 15.0, 15.0, 15.0]);
        let s2 = control_step(&hand, &config, &s0, &r, &active);
        assert!((s2.commanded_excursions[0] - 0.0).abs() < 1e-12);

        // No force tightens (excursion grows by k * 10 = 10 mm).
        let r = readings([0.0, 0.0, 0.0, 0.0, 0.0]);
        let s3 = control_step(&hand, &config, &s0, &r, &active);
        assert!((s3.commanded_excursions[0] - 0.015).abs() < 1e-12);

        // Floor at zero: a slack wire cannot push.
        let s4 = ControllerState::new(vec![0.001; 3]);
        let r = readings([30.0, 30.0, 30.0, 30.0, 30.0]);
        let s5 = control_step(&hand, &config, &s4, &r, &active);
        assert_eq!(s5.commanded_excursions, vec![0.0; 3]);
    }

    #[test]
    fn inactive_actuators_hold() {
        let hand = default_hand();
        let config = ControllerConfig::default();
        let s0 = ControllerState::new(vec![0.004; 3]);
        let r = readings([0.0; 5]);
        let s1 = control_step(&hand, &config, &s0, &r, &[false, true, false]);
        assert_eq!(s1.commanded_excursions[0], 0.004);
        assert_eq!(s1.commanded_excursions[2], 0.004);
        assert!(s1.commanded_excursions[1] > 0.004);
    }
}
