//! Sharp Bellman function for the multiplicative BMO inequality
//!
//! ```text
//! ‖φ‖_r ≤ (Γ(r+1)/Γ(p+1))^{1/r} ‖φ‖_p^{p/r} ‖φ‖_BMO^{1-p/r}
//! ```
//!
//! together with the extremal functions and tools to check both numerically.

pub mod bellman;
pub mod cli;
pub mod domain;
pub mod error;
pub mod specfn;
pub mod testfn;
pub mod verify;

pub use error::{Error, Result};
