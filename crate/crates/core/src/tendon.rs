//! Tendon routing: tension-to-torque maps, wire excursion, and the
//! movable-pulley differential that lets one actuator drive two fingers.

use crate::error::{Result, SimError};
use crate::hand_model::FingerSpec;
use serde::Serialize;

/// Wire state of one actuator at a quasi-static instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TendonState {
    /// Tension at the actuator, N.
    pub actuator_tension: f64,
    /// Tension in each driven branch, N.
    pub branch_tensions: Vec<f64>,
    /// Wire drawn in past rest at the actuator, m.
    pub actuator_excursion: f64,
    /// Wire drawn in by each finger's flexion, m.
    pub branch_excursions: Vec<f64>,
    /// Set when a requested tension exceeded the actuator limit and was
    /// clamped; tension is never silently exceeded.
    pub saturated: bool,
}

/// Flexion torque at each joint from a branch tension, Nm.
pub fn joint_torques(finger: &FingerSpec, branch_tension: f64) -> Result<Vec<f64>> {
    if branch_tension < 0.0 {
        return Err(SimError::Domain(format!(
            "branch tension must be non-negative, got {branch_tension}"
        )));
    }
    Ok(finger
        .joints
        .iter()
        .map(|j| j.moment_arm * branch_tension)
        .collect())
}

/// Wire drawn in by flexing `finger` to `angles`, m. Zero at rest,
/// monotone in each angle.
pub fn wire_excursion(finger: &FingerSpec, angles: &[f64]) -> Result<f64> {
    if angles.len() != finger.joints.len() {
        return Err(SimError::Domain(format!(
            "expected {} angles, got {}",
            finger.joints.len(),
            angles.len()
        )));
    }
    for (i, (&theta, j)) in angles.iter().zip(&finger.joints).enumerate() {
        // Allow a hair of slack for clamped solver output.
        if theta < j.limits[0] - 1e-9 || theta > j.limits[1] + 1e-9 {
            return Err(SimError::Domain(format!(
                "joint {i} angle {theta} outside limits [{}, {}]",
                j.limits[0], j.limits[1]
            )));
        }
    }
    Ok(angles
        .iter()
        .zip(&finger.joints)
        .map(|(&theta, j)| j.moment_arm * (theta - j.rest_angle))
        .sum())
}

/// Force balance on a frictionless movable pulley: each branch carries half
/// the actuator tension.
pub fn pulley_split(actuator_tension: f64) -> Result<(f64, f64)> {
    if actuator_tension < 0.0 {
        return Err(SimError::Domain(format!(
            "actuator tension must be non-negative, got {actuator_tension}"
        )));
    }
    let half = actuator_tension / 2.0;
    Ok((half, half))
}

/// Excursion split across a movable pulley: the branches always satisfy
/// `e1 + e2 = 2 * e_act`. If one branch is blocked at a fixed excursion,
/// the other takes the remainder.
pub fn pulley_excursions(actuator_excursion: f64, branch_blocked: Option<f64>) -> Result<(f64, f64)> {
    if actuator_excursion < 0.0 {
        return Err(SimError::Domain(format!(
            "actuator excursion must be non-negative, got {actuator_excursion}"
        )));
    }
    match branch_blocked {
        None => Ok((actuator_excursion, actuator_excursion)),
        Some(e_blocked) => {
            let e_free = 2.0 * actuator_excursion - e_blocked;
            if e_free < 0.0 {
                return Err(SimError::InfeasibleRouting(format!(
                    "free branch would need negative excursion {e_free}"
                )));
            }
            Ok((e_blocked, e_free))
        }
    }
}
