//! Parametric description of the hand: finger chains with torsional-spring
//! joints, tendon actuators, and sensor layout.
//!
//! All internal units are SI (N, Nm, m, rad). Joint compliance is stored in
//! deg/Nm because that is how spring data sheets quote it; `stiffness`
//! converts to Nm/rad. Kilogram-force only appears at config and report
//! boundaries via [`KGF_TO_N`].

use crate::error::{Result, SimError};
use crate::geom::{Pose2, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Newtons per kilogram-force.
pub const KGF_TO_N: f64 = 9.80665;

/// Standard gravity, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Default whole-robot mass carried by the hands, kg (design figure).
pub const ROBOT_MASS_KG: f64 = 56.4;

/// As-weighed robot mass at load-test time, kg. Kept alongside the design
/// figure because the two differ; reports use [`ROBOT_MASS_KG`] by default.
pub const ROBOT_MASS_ALT_KG: f64 = 56.2;

/// Force sensor ceiling, N.
pub const SENSOR_MAX_N: f64 = 500.0;

/// Default actuator tension limit: 50 kgf in newtons.
pub const ACTUATOR_MAX_TENSION_N: f64 = 50.0 * KGF_TO_N;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerName {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl FingerName {
    pub const ALL: [FingerName; 5] = [
        FingerName::Thumb,
        FingerName::Index,
        FingerName::Middle,
        FingerName::Ring,
        FingerName::Little,
    ];

    pub fn index(self) -> usize {
        match self {
            FingerName::Thumb => 0,
            FingerName::Index => 1,
            FingerName::Middle => 2,
            FingerName::Ring => 3,
            FingerName::Little => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FingerName::Thumb => "thumb",
            FingerName::Index => "index",
            FingerName::Middle => "middle",
            FingerName::Ring => "ring",
            FingerName::Little => "little",
        }
    }
}

impl fmt::Display for FingerName {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One torsional-spring joint and the link distal to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    /// Angular compliance, degrees of deflection per Nm of torque.
    pub compliance: f64,
    /// Unloaded angle, rad.
    #[serde(default)]
    pub rest_angle: f64,
    /// Flexion range `[min, max]`, rad.
    pub limits: [f64; 2],
    /// Perpendicular distance from the wire to the joint axis, m.
    pub moment_arm: f64,
    /// Length of the link distal to this joint, m.
    pub link_length: f64,
}

impl JointSpec {
    /// Torsional stiffness in Nm/rad: the reciprocal of compliance after
    /// converting deg/Nm to rad/Nm.
    pub fn stiffness(&self) -> Result<f64> {
        stiffness(self)
    }
}

/// Torsional stiffness of a joint, Nm/rad.
pub fn stiffness(joint: &JointSpec) -> Result<f64> {
    if joint.compliance <= 0.0 {
        return Err(SimError::InvalidSpec(format!(
            "joint compliance must be positive, got {}",
            joint.compliance
        )));
    }
    Ok(1.0 / (joint.compliance * PI / 180.0))
}

/// A three-joint finger chain. Joints are ordered proximal to distal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerSpec {
    pub name: FingerName,
    pub joints: Vec<JointSpec>,
    /// Pose of the proximal joint in the hand plane.
    pub base_pose: Pose2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Direct,
    MovablePulley,
}

/// One wire-tensioning actuator and the finger(s) its wire drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorSpec {
    pub id: String,
    /// Tension ceiling, N.
    pub max_tension: f64,
    pub driven_fingers: Vec<FingerName>,
    pub coupling: Coupling,
}

/// Full parametric hand description. Immutable after validation; share
/// read-only across concurrent simulation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandSpec {
    pub fingers: Vec<FingerSpec>,
    pub actuators: Vec<ActuatorSpec>,
    /// Palm force-sensor sites in the hand plane (fingertip sites are
    /// implicit, one per finger).
    pub palm_sensor_sites: Vec<Vec2>,
    /// Per-sensor force ceiling, N.
    pub sensor_max: f64,
    /// m/s^2
    pub gravity: f64,
    /// kg
    pub robot_mass: f64,
}

impl HandSpec {
    pub fn finger(&self, name: FingerName) -> &FingerSpec {
        self.fingers
            .iter()
            .find(|f| f.name == name)
            .unwrap_or_else(|| panic!("finger {name} missing from spec"))
    }

    /// Index into `actuators` of the actuator driving `finger`.
    pub fn actuator_for(&self, finger: FingerName) -> Option<usize> {
        self.actuators
            .iter()
            .position(|a| a.driven_fingers.contains(&finger))
    }

    pub fn sensor_count(&self) -> usize {
        self.fingers.len() + self.palm_sensor_sites.len()
    }
}

/// A named invariant violation; violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn violation(field: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation {
        field: field.into(),
        rule: rule.into(),
    }
}

/// Checks every type invariant; empty iff the spec is valid.
pub fn validate(spec: &HandSpec) -> Vec<Violation> {
    let mut v = Vec::new();

    if spec.fingers.len() != 5 {
        v.push(violation("fingers", format!("expected 5 fingers, got {}", spec.fingers.len())));
    }
    for name in FingerName::ALL {
        if !spec.fingers.iter().any(|f| f.name == name) {
            v.push(violation("fingers", format!("finger {name} missing")));
        }
    }

    for finger in &spec.fingers {
        let fname = format!("fingers.{}", finger.name);
        if finger.joints.len() != 3 {
            v.push(violation(
                format!("{fname}.joints"),
                format!("joint count != 3 (got {})", finger.joints.len()),
            ));
        }
        for (i, j) in finger.joints.iter().enumerate() {
            let jname = format!("{fname}.joints[{i}]");
            if !(j.compliance > 0.0) {
                v.push(violation(format!("{jname}.compliance"), "must be > 0"));
            }
            if !(j.moment_arm > 0.0) {
                v.push(violation(format!("{jname}.moment_arm"), "must be > 0"));
            }
            if !(j.link_length > 0.0) {
                v.push(violation(format!("{jname}.link_length"), "must be > 0"));
            }
            if !(j.limits[0] <= j.rest_angle && j.rest_angle <= j.limits[1]) {
                v.push(violation(
                    format!("{jname}.rest_angle"),
                    "must lie within limits [min, max]",
                ));
            }
        }
        // Proximal softest, distal stiffest: compliance non-increasing.
        for w in finger.joints.windows(2) {
            if w[0].compliance < w[1].compliance {
                v.push(violation(
                    format!("{fname}.joints"),
                    "compliance ordering: must be non-increasing proximal to distal",
                ));
                break;
            }
        }
    }

    for (i, a) in spec.actuators.iter().enumerate() {
        let aname = format!("actuators[{i}] ({})", a.id);
        if !(a.max_tension > 0.0) {
            v.push(violation(format!("{aname}.max_tension"), "must be > 0"));
        }
        let pulley = a.coupling == Coupling::MovablePulley;
        if pulley != (a.driven_fingers.len() == 2) {
            v.push(violation(
                format!("{aname}.coupling"),
                "movable_pulley iff exactly 2 driven fingers",
            ));
        }
        if a.driven_fingers.is_empty() || a.driven_fingers.len() > 2 {
            v.push(violation(
                format!("{aname}.driven_fingers"),
                "must drive 1 or 2 fingers",
            ));
        }
    }

    for name in FingerName::ALL {
        let n = spec
            .actuators
            .iter()
            .filter(|a| a.driven_fingers.contains(&name))
            .count();
        if n != 1 {
            v.push(violation(
                "actuators",
                format!("finger {name} driven by {n} actuators, expected exactly 1"),
            ));
        }
    }

    if spec.sensor_count() != 10 {
        v.push(violation(
            "palm_sensor_sites",
            format!("sensor count = {}, expected 10", spec.sensor_count()),
        ));
    }
    if !(spec.sensor_max > 0.0) {
        v.push(violation("sensor_max", "must be > 0"));
    }
    if !(spec.gravity > 0.0) {
        v.push(violation("gravity", "must be > 0"));
    }
    if !(spec.robot_mass > 0.0) {
        v.push(violation("robot_mass", "must be > 0"));
    }

    v
}

fn finger(
    name: FingerName,
    compliances: [f64; 3],
    base: Pose2,
) -> FingerSpec {
    // Moment arms taper distally; link lengths put fingertip reach at
    // 85 mm so palm (80 mm) + finger = 165 mm overall.
    const MOMENT_ARMS: [f64; 3] = [0.010, 0.008, 0.006];
    const LINK_LENGTHS: [f64; 3] = [0.040, 0.025, 0.020];
    let joints = (0..3)
        .map(|i| JointSpec {
            compliance: compliances[i],
            rest_angle: 0.0,
            limits: [0.0, PI / 2.0],
            moment_arm: MOMENT_ARMS[i],
            link_length: LINK_LENGTHS[i],
        })
        .collect();
    FingerSpec {
        name,
        joints,
        base_pose: base,
    }
}

/// The stock hand: measured per-joint spring compliances, one direct thumb
/// wire plus two pulley-coupled finger pairs, ten 500 N sensors.
pub fn default_hand() -> HandSpec {
    let fingers = vec![
        finger(FingerName::Thumb, [664.0, 443.0, 443.0], Pose2::new(0.015, -0.030, 0.0)),
        finger(FingerName::Index, [863.0, 664.0, 443.0], Pose2::new(0.080, 0.0, 0.0)),
        finger(FingerName::Middle, [903.0, 707.0, 443.0], Pose2::new(0.080, 0.0, 0.0)),
        finger(FingerName::Ring, [863.0, 664.0, 443.0], Pose2::new(0.080, 0.0, 0.0)),
        finger(FingerName::Little, [707.0, 664.0, 443.0], Pose2::new(0.080, 0.0, 0.0)),
    ];
    let actuators = vec![
        ActuatorSpec {
            id: "thumb".to_string(),
            max_tension: ACTUATOR_MAX_TENSION_N,
            driven_fingers: vec![FingerName::Thumb],
            coupling: Coupling::Direct,
        },
        ActuatorSpec {
            id: "index_middle".to_string(),
            max_tension: ACTUATOR_MAX_TENSION_N,
            driven_fingers: vec![FingerName::Index, FingerName::Middle],
            coupling: Coupling::MovablePulley,
        },
        ActuatorSpec {
            id: "ring_little".to_string(),
            max_tension: ACTUATOR_MAX_TENSION_N,
            driven_fingers: vec![FingerName::Ring, FingerName::Little],
            coupling: Coupling::MovablePulley,
        },
    ];
    // Uniform line of palm sensors across the palm plate.
    let palm_sensor_sites = (0..5)
        .map(|i| Vec2::new(0.010 + 0.015 * i as f64, 0.0))
        .collect();
    HandSpec {
        fingers,
        actuators,
        palm_sensor_sites,
        sensor_max: SENSOR_MAX_N,
        gravity: STANDARD_GRAVITY,
        robot_mass: ROBOT_MASS_KG,
    }
}
