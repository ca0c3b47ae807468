//! Payload-to-tension analysis: calibrates an aggregate grip-efficiency
//! from a measured (mass, peak tension) datapoint, extrapolates capacity
//! at the actuator limit, and runs simulated payload ramps.

use crate::contact::Obstacle;
use crate::error::{Result, SimError};
use crate::geom::Vec2;
use crate::hand_model::{HandSpec, KGF_TO_N};
use crate::solver::{solve_hand, ExternalLoad, FingerLoads, HandCommand, HandState};
use serde::{Deserialize, Serialize};

/// Payload description for ramps and margin reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadScenario {
    /// kg
    pub payload_mass: f64,
    /// 1 or 2 hands sharing the load evenly.
    pub hands_sharing: u32,
    /// Masses for a sweep, kg.
    #[serde(default)]
    pub ramp: Vec<f64>,
    /// kg supportable per kgf of peak per-actuator tension.
    pub grip_efficiency: f64,
}

/// Capacity and margin of the hand against a payload.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    /// Peak per-actuator tension needed for the per-hand share, kgf.
    pub required_tension_kgf: f64,
    /// Same, N.
    pub required_tension_n: f64,
    /// Mass one hand can hold at actuator saturation, kg.
    pub capacity_mass_kg: f64,
    /// Per-hand share of the payload, kg.
    pub share_kg: f64,
    /// capacity / share.
    pub margin_ratio: f64,
    pub pass: bool,
}

/// One entry of a simulated payload ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampRow {
    pub mass_kg: f64,
    pub actuator_id: String,
    #[serde(rename = "tension_N")]
    pub tension_n: f64,
    pub tension_kgf: f64,
    pub saturated: bool,
    pub converged: bool,
}

/// Aggregate linear grip model: kg held per kgf of peak actuator tension.
pub fn calibrate_efficiency(mass_kg: f64, peak_tension_kgf: f64) -> Result<f64> {
    if !(mass_kg > 0.0) || !(peak_tension_kgf > 0.0) {
        return Err(SimError::Domain(format!(
            "calibration datapoint must be positive, got ({mass_kg} kg, {peak_tension_kgf} kgf)"
        )));
    }
    Ok(mass_kg / peak_tension_kgf)
}

/// Peak actuator tension (kgf) needed for `mass_kg` split evenly across
/// `hands_sharing` hands, under efficiency `eta`.
pub fn required_tension(mass_kg: f64, hands_sharing: u32, eta: f64) -> f64 {
    (mass_kg / hands_sharing.max(1) as f64) / eta
}

/// Capacity/margin report: capacity is the linear extrapolation of the
/// calibrated efficiency to the actuator tension limit.
pub fn margin_report(spec: &HandSpec, scenario: &PayloadScenario) -> MarginReport {
    let max_tension_kgf = spec
        .actuators
        .iter()
        .map(|a| a.max_tension / KGF_TO_N)
        .fold(0.0, f64::max);
    let eta = scenario.grip_efficiency;
    let capacity_mass_kg = eta * max_tension_kgf;
    let share_kg = scenario.payload_mass / scenario.hands_sharing.max(1) as f64;
    let required_tension_kgf = required_tension(scenario.payload_mass, scenario.hands_sharing, eta);
    MarginReport {
        required_tension_kgf,
        required_tension_n: required_tension_kgf * KGF_TO_N,
        capacity_mass_kg,
        share_kg,
        margin_ratio: capacity_mass_kg / share_kg,
        pass: capacity_mass_kg >= share_kg,
    }
}

/// Simulated payload ramp under a length-hold grasp.
///
/// The zero-payload grasp is solved once; the payload weight is then
/// applied as point loads pinned to the grasp's contact points,
/// distributed proportionally to their normal forces, and the hand is
/// re-solved per mass with the commanded wire lengths frozen. A solver
/// failure at one mass is recorded as a failed row and the ramp continues.
pub fn payload_ramp(
    spec: &HandSpec,
    obstacles: &[Obstacle],
    grasp_excursions: &[f64],
    masses: &[f64],
    load_direction: Vec2,
    hands_sharing: u32,
) -> Result<Vec<RampRow>> {
    let dir = load_direction
        .normalized()
        .ok_or_else(|| SimError::Domain("load direction must be nonzero".into()))?;
    let command = HandCommand::Excursions(grasp_excursions.to_vec());

    let base = solve_hand(spec, &command, obstacles, &FingerLoads::default())?;
    let anchors = load_anchors(&base)?;

    let mut rows = Vec::new();
    for &mass in masses {
        if mass < 0.0 {
            return Err(SimError::Domain(format!("ramp mass must be non-negative, got {mass}")));
        }
        let weight = mass * spec.gravity / hands_sharing.max(1) as f64;
        let mut loads = FingerLoads::default();
        for a in &anchors {
            loads[a.finger].push(ExternalLoad {
                link: a.link,
                local: a.local,
                force: dir * (weight * a.share),
            });
        }
        match solve_hand(spec, &command, obstacles, &loads) {
            Ok(state) => {
                for (ai, t) in state.tendons.iter().enumerate() {
                    rows.push(RampRow {
                        mass_kg: mass,
                        actuator_id: spec.actuators[ai].id.clone(),
                        tension_n: t.actuator_tension,
                        tension_kgf: t.actuator_tension / KGF_TO_N,
                        saturated: t.saturated,
                        converged: state.diagnostics.converged,
                    });
                }
            }
            Err(SimError::NonConvergence { .. }) => {
                for a in &spec.actuators {
                    rows.push(RampRow {
                        mass_kg: mass,
                        actuator_id: a.id.clone(),
                        tension_n: f64::NAN,
                        tension_kgf: f64::NAN,
                        saturated: false,
                        converged: false,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

struct LoadAnchor {
    finger: usize,
    link: usize,
    /// Contact point in the link frame at the base grasp.
    local: Vec2,
    /// Fraction of the payload weight carried at this anchor.
    share: f64,
}

fn load_anchors(base: &HandState) -> Result<Vec<LoadAnchor>> {
    let mut anchors = Vec::new();
    let mut total = 0.0;
    for f in &base.fingers {
        // Link headings recovered from consecutive solved endpoints.
        let phis: Vec<f64> = (0..f.angles.len())
            .map(|j| {
                let d = f.endpoints[j + 1] - f.endpoints[j];
                d.y.atan2(d.x)
            })
            .collect();
        for c in &f.contacts {
            let rel = c.contact.point - f.endpoints[c.link];
            let local = rel.rotated(-phis[c.link]);
            anchors.push(LoadAnchor {
                finger: f.name.index(),
                link: c.link,
                local,
                share: c.contact.force,
            });
            total += c.contact.force;
        }
    }
    if total <= 0.0 {
        return Err(SimError::Domain(
            "zero-payload grasp has no contact force to carry the load".into(),
        ));
    }
    for a in &mut anchors {
        a.share /= total;
    }
    Ok(anchors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand_model::default_hand;
    use approx::assert_relative_eq;

    #[test]
    fn calibration_examples() {
        assert_relative_eq!(calibrate_efficiency(37.2, 30.0).unwrap(), 1.24, max_relative = 1e-12);
        assert_relative_eq!(calibrate_efficiency(12.5, 12.5).unwrap(), 1.0, max_relative = 1e-12);
        assert!(calibrate_efficiency(0.0, 30.0).is_err());
        assert!(calibrate_efficiency(10.0, -1.0).is_err());
    }

    #[test]
    fn required_tension_examples() {
        let eta = calibrate_efficiency(37.2, 30.0).unwrap();
        assert_relative_eq!(required_tension(37.2, 1, eta), 30.0, max_relative = 1e-12);
        assert_relative_eq!(required_tension(56.4, 2, eta), 22.742, max_relative = 1e-4);
        assert_eq!(required_tension(0.0, 1, eta), 0.0);
    }

    #[test]
    fn required_tension_round_trip_and_linearity() {
        let eta = calibrate_efficiency(37.2, 30.0).unwrap();
        let t = required_tension(37.2, 1, eta);
        assert!((t - 30.0).abs() <= 1e-12 * 30.0);
        // halving hands doubles per-hand tension
        assert_relative_eq!(
            required_tension(50.0, 1, eta),
            2.0 * required_tension(50.0, 2, eta),
            max_relative = 1e-14
        );
        // homogeneous in mass
        assert_relative_eq!(
            required_tension(2.0 * 17.3, 1, eta),
            2.0 * required_tension(17.3, 1, eta),
            max_relative = 1e-14
        );
    }

    #[test]
    fn margin_report_defaults() {
        let spec = default_hand();
        let scenario = PayloadScenario {
            payload_mass: spec.robot_mass,
            hands_sharing: 2,
            ramp: vec![],
            grip_efficiency: calibrate_efficiency(37.2, 30.0).unwrap(),
        };
        let report = margin_report(&spec, &scenario);
        assert_relative_eq!(report.capacity_mass_kg, 62.0, max_relative = 1e-12);
        assert_relative_eq!(report.share_kg, 28.2, max_relative = 1e-12);
        assert!(report.pass);
        assert!(report.margin_ratio > 2.0);
    }

    #[test]
    fn margin_fails_above_capacity() {
        let spec = default_hand();
        let scenario = PayloadScenario {
            payload_mass: 63.0,
            hands_sharing: 1,
            ramp: vec![],
            grip_efficiency: 1.24,
        };
        assert!(!margin_report(&spec, &scenario).pass);
    }

    #[test]
    fn margin_reproduces_demonstrated_point_at_lower_limit() {
        let mut spec = default_hand();
        for a in &mut spec.actuators {
            a.max_tension = 30.0 * KGF_TO_N;
        }
        let scenario = PayloadScenario {
            payload_mass: 37.2,
            hands_sharing: 1,
            ramp: vec![],
            grip_efficiency: 1.24,
        };
        let report = margin_report(&spec, &scenario);
        assert_relative_eq!(report.capacity_mass_kg, 37.2, max_relative = 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn margin_pass_is_monotone_in_max_tension() {
        let scenario = PayloadScenario {
            payload_mass: 56.4,
            hands_sharing: 2,
            ramp: vec![],
            grip_efficiency: 1.24,
        };
        let mut last_pass = false;
        for kgf in [10.0, 20.0, 23.0, 30.0, 40.0, 50.0, 80.0] {
            let mut spec = default_hand();
            for a in &mut spec.actuators {
                a.max_tension = kgf * KGF_TO_N;
            }
            let pass = margin_report(&spec, &scenario).pass;
            assert!(pass || !last_pass, "pass flipped back to fail at {kgf} kgf");
            last_pass = pass;
        }
        assert!(last_pass);
    }
}
