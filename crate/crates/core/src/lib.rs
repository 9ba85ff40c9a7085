pub mod agents;
pub mod config;
pub mod env;
pub mod gaze;
pub mod harness;
pub mod mdp;
pub mod metrics;
pub mod nn;
pub mod replay;

mod codec;
