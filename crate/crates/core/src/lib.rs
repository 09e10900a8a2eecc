pub mod agent;
pub mod backend;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod eval;
