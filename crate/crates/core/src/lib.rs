//! Multi-agent UCB bandits on stochastic-block-model communication graphs.

pub mod cli;
pub mod clustering;
pub mod environment;
pub mod graph;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod theory;
