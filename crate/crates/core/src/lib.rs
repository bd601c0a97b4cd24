pub mod dft;
pub mod numtheory;
pub mod rng;
pub mod signal;
pub mod config;
pub mod planner;
pub mod ops;
pub mod peeling;
pub mod views;
pub mod gating;
pub mod verification;
pub mod pipeline;
pub mod montecarlo;
pub mod bench;
pub mod cli;
