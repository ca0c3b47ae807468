//! Scenario-driven command-line front end for the tendon-driven hand
//! simulator: JSON scenarios in, CSV telemetry and text reports out.

pub mod app;
pub mod scenario;
pub mod telemetry;
