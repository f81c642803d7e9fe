//! Cooperation planning for human-robot collaboration.
//!
//! Tasks are modelled as AND/OR graphs ([`graph`]) loaded from model files
//! ([`model`]). A [`manager::TaskManager`] walks the graph online, suggesting
//! actions along the cheapest cooperation path and adapting when the human
//! operator does something else or stops the robot. The [`sim`] module
//! drives the manager with simulated agents ([`agents`]) on a virtual clock
//! and reports the timing metrics `T_m`, `T_h`, `T_r` and `T_c`.

pub mod agents;
pub mod graph;
pub mod manager;
pub mod model;
pub mod pose;
pub mod sim;
pub mod time;
