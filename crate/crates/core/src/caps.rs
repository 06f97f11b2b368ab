//! Size caps for the exhaustive and dense-matrix routines.
//!
//! Every cap can be overridden through the `CERTIFY_CAPS` environment
//! variable, a comma separated list of `key=value` pairs, e.g.
//! `CERTIFY_CAPS=exhaustive_leaves=20,matrix_dim=8192`.

use serde::{Deserialize, Serialize};

use crate::error::{CertifyError, Result};

pub const CAPS_ENV: &str = "CERTIFY_CAPS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest leaf count for which all 2^n subsets / inputs are enumerated.
    pub exhaustive_leaves: usize,
    /// Largest leaf count for the per-input expectation DP.
    pub expectation_leaves: usize,
    /// Largest number of rows in a generated function table.
    pub table_rows: usize,
    /// Largest dimension of a materialized adversary matrix.
    pub matrix_dim: usize,
    /// Components up to this size use a dense symmetric eigensolve; larger
    /// ones fall back to power iteration.
    pub dense_eigen_dim: usize,
    /// Largest `|S| * n` handed to the dual optimizer.
    pub dual_cells: usize,
    /// Restart cap of the zero-error wrapper.
    pub restarts: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            exhaustive_leaves: 24,
            expectation_leaves: 1 << 20,
            table_rows: 4096,
            matrix_dim: 4096,
            dense_eigen_dim: 512,
            dual_cells: 200_000,
            restarts: 10_000,
        }
    }
}

impl Caps {
    /// Defaults overridden by `CERTIFY_CAPS` when it is set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(CAPS_ENV) {
            Ok(list) => Self::default().with_overrides(&list),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn with_overrides(mut self, list: &str) -> Result<Self> {
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                CertifyError::InvalidArgument(format!("{CAPS_ENV}: expected key=value, got {item:?}"))
            })?;
            let value: usize = value.trim().parse().map_err(|_| {
                CertifyError::InvalidArgument(format!("{CAPS_ENV}: {key} is not an integer"))
            })?;
            let slot = match key.trim() {
                "exhaustive_leaves" => &mut self.exhaustive_leaves,
                "expectation_leaves" => &mut self.expectation_leaves,
                "table_rows" => &mut self.table_rows,
                "matrix_dim" => &mut self.matrix_dim,
                "dense_eigen_dim" => &mut self.dense_eigen_dim,
                "dual_cells" => &mut self.dual_cells,
                "restarts" => &mut self.restarts,
                other => {
                    return Err(CertifyError::InvalidArgument(format!(
                        "{CAPS_ENV}: unknown cap {other:?}"
                    )))
                }
            };
            *slot = value;
        }
        Ok(self)
    }
}

pub(crate) fn check_cap(what: &'static str, size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(CertifyError::CapExceeded { what, size, cap })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse() {
        let caps = Caps::default()
            .with_overrides("exhaustive_leaves=12, matrix_dim=100")
            .unwrap();
        assert_eq!(caps.exhaustive_leaves, 12);
        assert_eq!(caps.matrix_dim, 100);
        assert_eq!(caps.table_rows, Caps::default().table_rows);
    }

    #[test]
    fn bad_overrides_rejected() {
        assert!(Caps::default().with_overrides("nope=1").is_err());
        assert!(Caps::default().with_overrides("matrix_dim").is_err());
        assert!(Caps::default().with_overrides("matrix_dim=x").is_err());
    }
}
