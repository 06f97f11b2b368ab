//! Certificates, randomized evaluation and adversary lower bounds for
//! `d`-regular, `k`-level balanced NAND formulas.
//!
//! * [`formula`]: shapes, evaluation, exhaustive minimal certificates.
//! * [`classical_eval`]: randomized short-circuit evaluation and its exact
//!   expected cost.
//! * [`linalg`]: dense symmetric matrices, spectral norms, Kronecker products.
//! * [`adversary`]: function tables, adversary matrices, primal and dual
//!   bound values, explicit constructions.
//! * [`direct_sum`]: t-fold product functions and their composed witnesses.
//! * [`cert_sim`]: query-cost simulation of the recursive certificate finders
//!   and the cutoff-and-restart wrapper.

pub mod adversary;
pub mod caps;
pub mod cert_sim;
pub mod classical_eval;
pub mod direct_sum;
pub mod error;
pub mod exec;
pub mod formula;
pub mod linalg;
pub mod stats;

pub use caps::Caps;
pub use error::{CertifyError, Result};
pub use exec::Exec;
pub use formula::{Certificate, FormulaShape, InputAssignment};

/// Serializes a `bool` as the integer 0 or 1.
pub(crate) mod bit_serde {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}
