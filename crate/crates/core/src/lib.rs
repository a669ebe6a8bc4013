//! Evolutionary program search driven by semantic deltas: candidates are
//! proposed by a language model as code edits plus a structured account of
//! what changed and why, and those accounts, rather than full programs, are
//! what later prompts see.

pub mod controller;
pub mod database;
pub mod delta;
pub mod eval;
pub mod llm;
pub mod sampler;
pub mod util;
