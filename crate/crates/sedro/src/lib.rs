//! Files, sockets and the command line around the `sedro-core` kernel.
//!
//! A session server steps one [`Environment`](sedro_core::Environment) in
//! lockstep with a remote agent over TCP or a subprocess's stdio, recording a
//! replayable [`SessionLog`](sedro_core::replay::SessionLog). Evaluation
//! scenarios run the same way and write JSON and CSV reports.

pub mod agents;
pub mod assets;
pub mod cli;
pub mod client;
pub mod eval;
pub mod logfile;
pub mod report;
pub mod session;
pub mod transport;

pub use assets::{AssetError, AssetPaths, Assets};
pub use client::ClientSession;
pub use transport::{Connection, TransportError};
