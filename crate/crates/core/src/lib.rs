pub mod diff;
pub mod gateway;
pub mod issues;
pub mod prompt;
pub mod report;
pub mod sonar;
pub mod analyzer;
pub mod orchestrator;
pub mod config;
pub mod service;
pub mod cli;
