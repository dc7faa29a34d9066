//! Curriculum-driven reinforcement learning for autonomous driving at an
//! unsignalized four-way intersection.
//!
//! The crate simulates an ego vehicle crossing a junction among
//! IDM-driven traffic, trains a discrete PPO policy on it, and schedules
//! the traffic density curriculum with an adversarial multi-armed bandit
//! that feeds on the training rewards.

pub mod bandit;
pub mod config;
pub mod env;
pub mod geom;
pub mod mdp;
pub mod csvio;
pub mod driver;
pub mod eval;
pub mod net;
pub mod savgol;
pub mod trainer;
