//! Registry of built-in manufactured source cases.

use conga_core::femspace::SmoothFunction;
use conga_core::solve::{helmholtz_case, ManufacturedCase};
use conga_core::Level;

use crate::error::{HarnessError, Result};

pub const CASES: [&str; 2] = ["helmholtz-w3.5", "zero"];

/// Resolves a case by name. `omega` replaces the case's default frequency.
pub fn lookup(name: &str, omega: f64) -> Result<ManufacturedCase> {
    match name {
        "helmholtz-w3.5" => Ok(helmholtz_case(omega)),
        "zero" => Ok(ManufacturedCase {
            name: "zero",
            omega,
            source: SmoothFunction::zero(Level::One),
            solution: SmoothFunction::zero(Level::One),
        }),
        other => Err(HarnessError::Config(format!("unknown case {other:?}; available: {}", CASES.join(", ")))),
    }
}
