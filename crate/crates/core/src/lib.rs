pub mod augment;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod exec;
mod fsutil;
pub mod evaluation;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod training;
