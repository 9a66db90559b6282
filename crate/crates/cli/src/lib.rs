//! Command line and HTTP front ends for the activity pipeline.

pub mod commands;
pub mod config;
pub mod service;

pub use config::AppConfig;
