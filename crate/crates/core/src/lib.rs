//! Robust adaptive FIR disturbance rejection.
//!
//! This crate holds the allocation-only numerical core: discrete-time LTI
//! tools ([`lti`]), the small-gain certificate for the largest safe FIR gain
//! ([`lft`]), the RLS-driven adaptive FIR controller ([`afdr`]), the
//! infinity-norm safety filter ([`safety`]), norm-bounded uncertainty
//! sampling ([`uncertainty`]) and the closed-loop simulator ([`sim`]).
//!
//! It is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod afdr;
pub mod error;
pub mod lft;
pub mod lti;
pub mod benchmark;
pub mod safety;
pub mod sim;
pub mod uncertainty;

pub use error::{Error, Result};
