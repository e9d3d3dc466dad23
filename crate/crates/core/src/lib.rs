//! Branched potential-flow networks under valve control.
//!
//! A tree of edges obeying `ΔH = k·Qⁿ` is fed by one source and drained at
//! leaf sinks held at a common head. Each sink has a valve on its terminal
//! edge, either continuously adjustable or ON/OFF. The crate solves steady
//! states, plans minimum-time operation in both control modes and measures
//! how much slower discrete control is than continuous control.

pub mod analysis;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod hydraulics;
pub mod network;

pub use error::{Error, ErrorClass, Result};
pub use hydraulics::{solve_state, FlowState, HydraulicModel, ValveConfiguration, ValveState};
pub use network::{parse_network, Demands, Edge, Network};
