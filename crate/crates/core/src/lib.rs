//! Covariant derivatives on fibred manifolds built from Ehresmann
//! connection data, evaluated exactly with nested forward-mode AD and
//! checked numerically at sampled points.

#![allow(clippy::needless_range_loop)]

pub mod connection;
pub mod covderiv;
pub mod expr;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod par;
pub mod report;
pub mod scalar;
pub mod scenarios;
pub mod verify;
