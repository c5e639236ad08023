//! Downlink data rate and handover analysis for a mobile user on a Poisson
//! cellular network.
//!
//! The crate models a user moving through a field of base stations placed as a
//! homogeneous Poisson point process, with Rayleigh fading and power-law path
//! loss. It computes, analytically and by Monte Carlo simulation:
//!
//! * the expected downlink rate when the user always connects to the nearest
//!   base station, and when it re-examines the nearest only every `s` slots
//!   (periodic handover skipping);
//! * the handover rate under both connection policies;
//! * a net utility (rate minus a per-handover cost) and the approximately
//!   optimal skipping period that maximizes it.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default `std`
//! feature for embedded use. All internal lengths are kilometers and all times
//! are slots; callers working in seconds convert at the boundary.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytic;
pub mod model;
pub mod quadrature;
pub mod simulate;
