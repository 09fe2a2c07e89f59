//! Motion stack for a pan/tilt/prismatic fruit-picking arm: closed-form
//! kinematics, quintic references, Cartesian velocity control, a perception
//! stub and a seeded simulator for whole picking cycles.

pub mod control;
pub mod kinematics;
pub mod perception;
pub mod simulation;
pub mod trajectory;
pub mod config;
pub mod report;
pub mod cli;
