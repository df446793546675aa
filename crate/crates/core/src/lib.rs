//! Finite structures carrying equivalence relations `E_n` on n-element subsets,
//! optionally with linear orders `<_n` on the `E_n`-classes.
//!
//! The crate covers the classes `K_0` (plain equivalence relations) and `K_P`
//! (classes of the arities in `P` linearly ordered): validation, isomorphism
//! and embedding search, the amalgamation procedures, bounded approximations
//! of the generic (Fraïssé) structures, EPPA searches and their failure
//! certificates, and the finite Ramsey counterexample machinery.

pub mod amalgam;
pub mod closure;
pub mod eppa;
pub mod error;
pub mod generic;
pub mod iso;
pub mod json;
pub mod model;
pub mod ramsey;
pub mod subset;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{validate, ClassSpec, FinStructure, ValidationReport};
