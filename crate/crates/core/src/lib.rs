//! Deterministic simulation and learning core for low-altitude UAV rescue
//! task offloading.
//!
//! The crate is organized bottom-up: seeded RNG streams, scenario data,
//! kinematics, the air-to-ground channel, latency/energy cost models, the
//! per-slot queue-aware decision transform, subarea assignment, and a small
//! self-contained neural substrate feeding a diffusion-policy actor-critic
//! trainer. Everything is deterministic given a seed and runs single-threaded;
//! no global state, no ambient randomness.
//!
//! `no_std` builds (with `alloc`) are supported by disabling the default
//! `std` feature; file IO and the CLI live in the companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod rng;
pub mod scenario;
pub mod kinematics;
pub mod channel;
pub mod costmodel;
pub mod lyapunov;
pub mod assignment;
pub mod neural;
pub mod diffusion;
pub mod env;
pub mod maddpg;
