//! Core model and services for coordinating volunteer evacuation transport.

pub mod context;
pub mod coordinator;
pub mod domain;
pub mod error;
pub mod plan;
pub mod recommend;
pub mod store;
pub mod travel;

pub use coordinator::{CoordError, Coordinator};
