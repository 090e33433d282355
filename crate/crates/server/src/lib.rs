//! HTTP API and operational tooling for the inventory service.

pub mod config;
pub mod error;
pub mod extract;
pub mod routes;

pub use extract::{Shared, SESSION_COOKIE};
pub use routes::{app, routes, with_middleware};
