//! Command-line front end, configuration and the HTTP service.

pub mod cli;
pub mod config;
pub mod db;
pub mod serve;

pub use config::AppConfig;
pub use db::{build_db, build_index, load_database, open_retriever, rebuild_index, BuildReport, ScriptRegistry};
