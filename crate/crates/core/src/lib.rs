//! Workbench for the colored Burau key agreement protocol (the Algebraic Eraser
//! realization), a linear-algebra attack recovering its shared key from public
//! data, and a breadth-first membership search that writes a permutation as a
//! short word in random generators.
//!
//! Module map:
//! - [`perm`]: permutations of `{1..n}` with left-to-right composition.
//! - [`ffla`]: prime-field arithmetic, dense matrices, nullspaces, the `κ` matrix.
//! - [`braid`]: braid words, free reduction and projection to `S_n`.
//! - [`cburau`]: evaluated colored Burau folding (the `⋆` product).
//! - [`cbkap`]: instance generation, transmissions and shared keys.
//! - [`attack`]: the two-phase key recovery.
//! - [`express`]: short expressions of permutations as words in generators.
//! - [`analysis`]: closed-form estimators for the membership search.
//! - [`harness`] and [`io`]: experiment drivers and file formats.

pub mod analysis;
pub mod attack;
pub mod braid;
pub mod cbkap;
pub mod cburau;
mod error;
pub mod express;
pub mod ffla;
pub mod harness;
pub mod io;
pub mod perm;

pub use error::{Error, Result};
