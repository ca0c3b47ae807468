//! Per-step CSV telemetry with a fixed, bit-stable column order.

use serde::{Deserialize, Serialize};
use std::io::Write;
use tendon_hand_sim::HandState;

/// Column order of the telemetry CSV; kept in lockstep with
/// [`TelemetryRow`] by a unit test.
pub const HEADERS: [&str; 31] = [
    "step",
    "actuator_0_tension_N",
    "actuator_1_tension_N",
    "actuator_2_tension_N",
    "sensor_fingertip_thumb_N",
    "sensor_fingertip_index_N",
    "sensor_fingertip_middle_N",
    "sensor_fingertip_ring_N",
    "sensor_fingertip_little_N",
    "sensor_palm_0_N",
    "sensor_palm_1_N",
    "sensor_palm_2_N",
    "sensor_palm_3_N",
    "sensor_palm_4_N",
    "thumb_joint_0_rad",
    "thumb_joint_1_rad",
    "thumb_joint_2_rad",
    "index_joint_0_rad",
    "index_joint_1_rad",
    "index_joint_2_rad",
    "middle_joint_0_rad",
    "middle_joint_1_rad",
    "middle_joint_2_rad",
    "ring_joint_0_rad",
    "ring_joint_1_rad",
    "ring_joint_2_rad",
    "little_joint_0_rad",
    "little_joint_1_rad",
    "little_joint_2_rad",
    "converged",
    "saturated",
];

/// One solved step flattened into the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub step: u64,
    #[serde(rename = "actuator_0_tension_N")]
    pub actuator_0_tension: f64,
    #[serde(rename = "actuator_1_tension_N")]
    pub actuator_1_tension: f64,
    #[serde(rename = "actuator_2_tension_N")]
    pub actuator_2_tension: f64,
    #[serde(rename = "sensor_fingertip_thumb_N")]
    pub fingertip_thumb: f64,
    #[serde(rename = "sensor_fingertip_index_N")]
    pub fingertip_index: f64,
    #[serde(rename = "sensor_fingertip_middle_N")]
    pub fingertip_middle: f64,
    #[serde(rename = "sensor_fingertip_ring_N")]
    pub fingertip_ring: f64,
    #[serde(rename = "sensor_fingertip_little_N")]
    pub fingertip_little: f64,
    #[serde(rename = "sensor_palm_0_N")]
    pub palm_0: f64,
    #[serde(rename = "sensor_palm_1_N")]
    pub palm_1: f64,
    #[serde(rename = "sensor_palm_2_N")]
    pub palm_2: f64,
    #[serde(rename = "sensor_palm_3_N")]
    pub palm_3: f64,
    #[serde(rename = "sensor_palm_4_N")]
    pub palm_4: f64,
    pub thumb_joint_0_rad: f64,
    pub thumb_joint_1_rad: f64,
    pub thumb_joint_2_rad: f64,
    pub index_joint_0_rad: f64,
    pub index_joint_1_rad: f64,
    pub index_joint_2_rad: f64,
    pub middle_joint_0_rad: f64,
    pub middle_joint_1_rad: f64,
    pub middle_joint_2_rad: f64,
    pub ring_joint_0_rad: f64,
    pub ring_joint_1_rad: f64,
    pub ring_joint_2_rad: f64,
    pub little_joint_0_rad: f64,
    pub little_joint_1_rad: f64,
    pub little_joint_2_rad: f64,
    pub converged: bool,
    pub saturated: bool,
}

impl TelemetryRow {
    /// Flattens a solved hand state. The schema is fixed at three actuators,
    /// five three-joint fingers, and five palm sensors.
    pub fn from_state(step: u64, state: &HandState) -> Result<TelemetryRow, String> {
        if state.tendons.len() != 3
            || state.fingers.len() != 5
            || state.fingers.iter().any(|f| f.angles.len() != 3)
            || state.sensors.len() != 10
        {
            return Err(
                "telemetry: schema needs 3 actuators, 5 three-joint fingers, 5 palm sensors"
                    .to_string(),
            );
        }
        let t = |i: usize| state.tendons[i].actuator_tension;
        let s = |i: usize| state.sensors[i].force;
        let a = |f: usize, j: usize| state.fingers[f].angles[j];
        Ok(TelemetryRow {
            step,
            actuator_0_tension: t(0),
            actuator_1_tension: t(1),
            actuator_2_tension: t(2),
            fingertip_thumb: s(0),
            fingertip_index: s(1),
            fingertip_middle: s(2),
            fingertip_ring: s(3),
            fingertip_little: s(4),
            palm_0: s(5),
            palm_1: s(6),
            palm_2: s(7),
            palm_3: s(8),
            palm_4: s(9),
            thumb_joint_0_rad: a(0, 0),
            thumb_joint_1_rad: a(0, 1),
            thumb_joint_2_rad: a(0, 2),
            index_joint_0_rad: a(1, 0),
            index_joint_1_rad: a(1, 1),
            index_joint_2_rad: a(1, 2),
            middle_joint_0_rad: a(2, 0),
            middle_joint_1_rad: a(2, 1),
            middle_joint_2_rad: a(2, 2),
            ring_joint_0_rad: a(3, 0),
            ring_joint_1_rad: a(3, 1),
            ring_joint_2_rad: a(3, 2),
            little_joint_0_rad: a(4, 0),
            little_joint_1_rad: a(4, 1),
            little_joint_2_rad: a(4, 2),
            converged: state.diagnostics.converged,
            saturated: state.any_saturated(),
        })
    }
}

/// Writes rows as CSV; an empty trajectory still gets the header line.
pub fn write_rows<W: Write>(writer: W, rows: &[TelemetryRow]) -> Result<(), String> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(HEADERS).map_err(|e| e.to_string())?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

/// Parses telemetry CSV back into rows (round-trip of [`write_rows`]).
pub fn read_rows<R: std::io::Read>(reader: R) -> Result<Vec<TelemetryRow>, String> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())
}
