//! Convex surrogates of the nonconvex rate, eavesdropper and power
//! constraints, their closed-form coefficients, and conic emission.

mod emit;
mod expansion;

pub use emit::{emit_subproblem, GroupVars, Layout, RowTarget, SubproblemSpec};
pub use expansion::{
    power_lhs_split, ul_power_split, DlCache, EveCache, ExpansionOptions, ExpansionPoint, GroupCache, UlCache,
};

use crate::error::{Error, Result};

/// Coefficients of `ln(1+g)/t >= A - B/g - C t`, tight at `(gamma, t)`.
pub fn zeta_coeffs(gamma: f64, t: f64) -> Result<(f64, f64, f64)> {
    if !(gamma > 0.0 && gamma.is_finite()) || !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!(
            "zeta coefficients need gamma > 0 and t > 0, got ({gamma}, {t})"
        )));
    }
    let l = gamma.ln_1p();
    let a = 2.0 * l / t + gamma / (t * (gamma + 1.0));
    let b = gamma * gamma / (t * (gamma + 1.0));
    let c = l / (t * t);
    Ok((a, b, c))
}

/// `A - B/gamma - C t`
pub fn zeta_lower(coeffs: (f64, f64, f64), gamma: f64, t: f64) -> f64 {
    coeffs.0 - coeffs.1 / gamma - coeffs.2 * t
}

/// Tangent of `ln(1+x)` at `x0`: `ln(1+x) <= a + b x`.
pub fn log_upper_coeffs(x0: f64) -> Result<(f64, f64)> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::Domain(format!("log tangent needs x >= 0, got {x0}")));
    }
    Ok((x0.ln_1p() - x0 / (1.0 + x0), 1.0 / (1.0 + x0)))
}

/// Convex upper bound of `beta/alpha` tight at `(beta0, alpha0)`; needs `2 alpha > alpha0`.
pub fn bilinear_upper(beta: f64, alpha: f64, beta0: f64, alpha0: f64) -> Result<f64> {
    if !(beta0 > 0.0 && alpha0 > 0.0) {
        return Err(Error::Domain(format!(
            "bilinear bound needs a positive anchor, got ({beta0}, {alpha0})"
        )));
    }
    let den = 2.0 * alpha - alpha0;
    if !(den > 0.0) {
        return Err(Error::Domain(format!("bilinear bound needs 2*alpha > alpha0, got {alpha} vs {alpha0}")));
    }
    Ok(0.5 * (beta * beta / (beta0 * alpha0) + beta0 / den))
}
