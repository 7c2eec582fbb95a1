//! Command-line workflows and the live session service.

pub mod cli;
pub mod service;

pub use cli::{run, Cli, CliError};
pub use service::{router, ApiError, CreateSession, ErrorBody, InstanceRef, Service, SessionView};
