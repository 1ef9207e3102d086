#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod props;
pub mod stub;
pub mod session;
pub mod fixtures;
