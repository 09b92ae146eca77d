//! Exchangeable random structures from pithy universal-existential theories.

pub mod logic;
pub mod theory;
pub mod closure;
pub mod construction;
pub mod graphon;
pub mod sampler;
pub mod seed;
pub mod verify;
pub mod pipeline;
