//! Moore's function `R`, seeded by `R(u) = u / z(0)` on `[-z(0), z(0))` and
//! extended by the bootstrap `R(t + z(t)) = R(t - z(t)) + 2`.
//!
//! Each bootstrap step follows one null line back through a mirror
//! reflection, so `R'` picks up the inverse Doppler factor exactly.

use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::protocol::DriveProtocol;
use crate::roots::increasing_root;

/// Upper bound on bootstrap steps; far beyond any desk-scale use.
const MAX_STEPS: usize = 1_000_000;

/// `R`, its exact derivative, and the bootstrap bookkeeping for one argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MooreValue {
    pub r: f64,
    pub r_prime: f64,
    /// Signed number of bootstrap steps (positive going forward in `u`).
    pub steps: i64,
    /// Argument inside the seed interval reached by the bootstrap.
    pub seed: f64,
}

/// Solves `t + s z(t) = u` for `t`, with `s = +1` or `-1`. Both functions
/// are strictly increasing for a subluminal mirror.
fn solve_characteristic(p: &DriveProtocol, u: f64, s: f64) -> Result<f64> {
    let (start, end) = p.domain();
    let g = |t: f64| {
        let (z, v) = p.eval_unchecked(t);
        (t + s * z - u, 1.0 + s * v)
    };
    let step = 0.5 * p.min_length();
    let guess = u - s * p.eval_unchecked(u).0;
    let (mut lo, mut hi) = (guess, guess);
    while g(lo).0 > 0.0 {
        let (v, _) = g(lo);
        lo -= v.max(step);
        if lo < start {
            return Err(CavityError::HorizonExceeded { needed: lo, end: start });
        }
    }
    while g(hi).0 < 0.0 {
        let (v, _) = g(hi);
        hi += (-v).max(step);
        if hi >= end {
            return Err(CavityError::HorizonExceeded { needed: hi, end });
        }
    }
    Ok(increasing_root(g, lo, hi))
}

/// Evaluates `R(u)` and `R'(u)`.
pub fn moore_r(p: &DriveProtocol, u: f64) -> Result<MooreValue> {
    let (z0, _) = p.evaluate(0.0)?;
    let mut u_cur = u;
    let mut log_factor = 0.0;
    let mut steps: i64 = 0;
    while u_cur >= z0 {
        // u = t + z(t); R(u) = R(t - z(t)) + 2.
        let t = solve_characteristic(p, u_cur, 1.0)?;
        let (z, v) = p.evaluate(t)?;
        log_factor += (1.0 - v).ln() - (1.0 + v).ln();
        u_cur = (t - z).max(-z0);
        steps += 1;
        if steps as usize > MAX_STEPS {
            return Err(CavityError::InvalidParameters(format!(
                "R({u}) needs more than {MAX_STEPS} bootstrap steps"
            )));
        }
    }
    while u_cur < -z0 {
        // u = t - z(t); R(u) = R(t + z(t)) - 2.
        let t = solve_characteristic(p, u_cur, -1.0)?;
        let (z, v) = p.evaluate(t)?;
        log_factor += (1.0 + v).ln() - (1.0 - v).ln();
        u_cur = t + z;
        if u_cur >= z0 {
            // Rounding at the seed edge.
            u_cur = z0 * (1.0 - f64::EPSILON);
        }
        steps -= 1;
        if (-steps) as usize > MAX_STEPS {
            return Err(CavityError::InvalidParameters(format!(
                "R({u}) needs more than {MAX_STEPS} bootstrap steps"
            )));
        }
    }
    Ok(MooreValue {
        r: u_cur / z0 + 2.0 * steps as f64,
        r_prime: log_factor.exp() / z0,
        steps,
        seed: u_cur,
    })
}
