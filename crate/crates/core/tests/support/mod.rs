#![allow(dead_code)]

pub mod attack;
pub mod engine;
pub mod network;
