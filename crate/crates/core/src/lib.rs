//! Quasi-static simulation of a tendon-driven, underactuated five-finger
//! hand with torsional-spring joints.
//!
//! The library is organized around the load path of the real mechanism:
//!
//! * [`hand_model`] — the parametric hand description and its validation,
//! * [`tendon`] — tension/excursion maps and the movable-pulley differential,
//! * [`contact`] — 2-D obstacle shapes, penalty contact, force sensors,
//! * [`solver`] — per-finger potential-energy minimization and the coupled
//!   hand solve,
//! * [`controller`] — threshold-gated force-feedback wire-length control,
//! * [`load`] — payload-to-tension calibration, capacity margins, and
//!   simulated payload ramps.
//!
//! All solves are deterministic pure functions of their inputs; a
//! [`hand_model::HandSpec`] is immutable after validation and safe to share
//! across concurrent runs.

pub mod contact;
pub mod controller;
pub mod error;
pub mod geom;
pub mod hand_model;
pub mod load;
pub mod solver;
pub mod tendon;

pub use contact::{contact_force, link_penetration, read_sensors, signed_distance, ObjectShape, Obstacle, SensorReading, SensorSite};
pub use controller::{control_step, run_grasp, select_feedback_force, ControllerConfig, ControllerState, GraspMode, GraspOptions, GraspResult};
pub use error::{Result, SimError};
pub use geom::{Pose2, Vec2};
pub use hand_model::{default_hand, stiffness, validate, ActuatorSpec, Coupling, FingerName, FingerSpec, HandSpec, JointSpec, Violation, KGF_TO_N, STANDARD_GRAVITY};
pub use load::{calibrate_efficiency, margin_report, payload_ramp, required_tension, MarginReport, PayloadScenario, RampRow};
pub use solver::{forward_kinematics, solve_finger, solve_hand, FingerProblem, FingerState, HandCommand, HandState, SolveDiagnostics};
pub use tendon::{joint_torques, pulley_excursions, pulley_split, wire_excursion, TendonState};
