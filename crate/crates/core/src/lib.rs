//! Simulator and analysis calculators for an optically-controlled
//! phase-change main memory.

pub mod array;
pub mod controller;
pub mod device;
pub mod engine;
pub mod geometry;
pub mod endurance;
pub mod optics;
pub mod sim;
