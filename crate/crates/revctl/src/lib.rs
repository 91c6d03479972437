//! HTTP API and operator CLI for the revenue collection service.
//!
//! [`server::Deployment`] opens a pool from a [`config::Config`];
//! [`api::router`] exposes the workflow; [`client::HttpGateway`] lets the
//! payment simulator drive a running server.
//!
//! ```bash
//! cargo run -p revctl --example http_api   # serve on loopback, capture, mine, fetch the report
//! ```

pub mod api;
pub mod cli;
pub mod client;
pub mod config;
pub mod server;
