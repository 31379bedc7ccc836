//! HTTP service and command-line front end for [`fts_core`].
//!
//! [`api::router`] builds the axum application; [`cli`] implements the `fts`
//! binary (`generate`, `run`, `serve`).

pub mod api;
pub mod catalog;
pub mod cli;
pub mod session;

pub use api::{router, AppState, ServiceConfig};
pub use catalog::Catalog;
