//! Model parameters for the half-line equation
//! `i u_t − u_xx + k|u|^p u + i a u = 0`, `u_x(0,t) = −λ|u(0,t)|^r u(0,t)`.

use crate::error::ParamError;
use serde::{Deserialize, Serialize};

/// The five model constants plus a mode flag.
///
/// Physical mode requires λ > 0 (boundary power injection), p > 0, k > 0
/// (defocusing interior nonlinearity), r > 0 and a ≥ 0. Validation mode
/// relaxes λ ≥ 0 and k ≥ 0 so that linear and forced manufactured runs can
/// switch individual terms off; operations that only make sense for the
/// physical model reject validation-mode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Boundary-injection strength λ.
    pub lambda: f64,
    /// Interior nonlinearity power p.
    pub p: f64,
    /// Interior nonlinearity strength k.
    pub k: f64,
    /// Boundary nonlinearity power r.
    pub r: f64,
    /// Linear damping a.
    pub a: f64,
    /// True when built through [`ModelParams::validation`].
    pub validation_mode: bool,
}

fn require_finite(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NotFinite { name, value })
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    require_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

fn require_nonnegative(name: &'static str, value: f64) -> Result<(), ParamError> {
    require_finite(name, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::Negative { name, value })
    }
}

impl ModelParams {
    /// Physical-mode constructor: λ > 0, p > 0, k > 0, r > 0, a ≥ 0.
    pub fn new(lambda: f64, p: f64, k: f64, r: f64, a: f64) -> Result<Self, ParamError> {
        require_positive("lambda", lambda)?;
        require_positive("p", p)?;
        require_positive("k", k)?;
        require_positive("r", r)?;
        require_nonnegative("a", a)?;
        Ok(Self {
            lambda,
            p,
            k,
            r,
            a,
            validation_mode: false,
        })
    }

    /// Validation-mode constructor: additionally admits λ = 0 and/or k = 0
    /// so the linear and manufactured-solution checks can run with
    /// individual terms disabled.
    pub fn validation(lambda: f64, p: f64, k: f64, r: f64, a: f64) -> Result<Self, ParamError> {
        require_nonnegative("lambda", lambda)?;
        require_positive("p", p)?;
        require_nonnegative("k", k)?;
        require_positive("r", r)?;
        require_nonnegative("a", a)?;
        Ok(Self {
            lambda,
            p,
            k,
            r,
            a,
            validation_mode: true,
        })
    }

    /// Errors unless the parameters were built in physical mode.
    pub fn require_physical(&self) -> Result<(), ParamError> {
        if self.validation_mode {
            Err(ParamError::ValidationMode)
        } else {
            Ok(())
        }
    }
}
