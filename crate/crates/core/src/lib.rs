//! Models, controllers and a fixed-step scenario simulator for a quadrotor
//! that rolls on a single driven wheel and transitions into flight.

pub mod actuators;
pub mod flight;
pub mod math;
pub mod rolling;
pub mod transition;
pub mod config;
pub mod output;
pub mod scenarios;
pub mod sim;
