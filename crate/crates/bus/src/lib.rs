//! Publish/subscribe topics and request/reply services for the twin.
//!
//! The [`Broker`] is the in-process core. [`server::BusServer`] exposes it
//! over TCP and WebSocket using the framing in [`wire`], and
//! [`client::BusClient`] speaks the TCP side of that framing.
//!
//! Topics carry [`Envelope`]s with a per-topic sequence number starting at 0.
//! Each subscriber owns a bounded FIFO; when it overflows, the oldest
//! envelope is discarded and the subscriber's drop counter increments.

mod broker;
pub mod catalog;
pub mod client;
mod error;
mod message;
pub mod server;
mod topic;
pub mod wire;

pub use broker::{Broker, ServiceHandle, Subscription, DEFAULT_QUEUE_CAPACITY};
pub use error::BusError;
pub use message::{Document, Envelope, ServiceCall, SimTime};
pub use topic::TopicName;
