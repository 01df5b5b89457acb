//! Machine IQ measurement: random Turing-machine test worlds, reference
//! agents, Success and IQ estimation, fatal-error analysis and rival
//! discounted measures.

pub mod agents;
pub mod alt;
pub mod builtin;
pub mod cli;
pub mod config;
pub mod fatal;
pub mod iq;
pub mod liferec;
pub mod ndtm;
pub mod rng;
pub mod session;
pub mod suite;
pub mod world;
