#![doc = include_str!("../../../book/src/overview.md")]

pub mod canonical;
pub mod coe;
pub mod escrow;
pub mod harness;
pub mod model;
pub mod query;
pub mod review_proc;
pub mod store;
