#![allow(dead_code)]

pub mod netcheck;
pub mod ranking;
