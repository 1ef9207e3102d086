#![allow(dead_code)]

pub mod harness;

#[path = "../../../core/tests/support/mod.rs"]
pub mod core;
