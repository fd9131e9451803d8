//! Cyclic platoon scheduling for automated intersections on conflict graphs.

pub mod analytics;
pub mod baselines;
pub mod bench;
pub mod graph;
pub mod params;
pub mod milp;
pub mod model;
pub mod schedule;
pub mod sim;
pub mod solver;
