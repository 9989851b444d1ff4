//! Closed-form weak-drive results: the continuous map and its solution,
//! classical energy growth, vacuum (Casimir) energy density, the Doppler
//! exponent and sweeping estimates.
//!
//! Scaled variables are `x~ = pi x / L0` and `A~ = pi A / L0`. In the weak
//! convention the stable fixed point of the fundamental resonance sits at
//! `x~ = pi`; [`scaled_coordinate`] converts from ring coordinates of the
//! exact map, where `z = L + A sin(Ωt + φ)` puts it at `x = 0` for `φ = 0`.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::moore::moore_r;
use crate::protocol::DriveProtocol;

/// Largest `A~` accepted without an explicit opt-in.
pub const WEAK_LIMIT: f64 = 0.2;
/// `A~` above which a warning is logged.
pub const WEAK_WARNING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakDriveParams {
    pub amplitude: f64,
    /// Resonant length `L0`.
    pub l0: f64,
    /// Resonance order.
    pub q: u32,
    /// `pi A / L0`.
    pub a_tilde: f64,
}

impl WeakDriveParams {
    /// Validated parameters; rejects `A~ > 0.2`.
    pub fn new(amplitude: f64, l0: f64, q: u32) -> Result<Self> {
        let p = Self::new_unchecked(amplitude, l0, q)?;
        if p.a_tilde > WEAK_LIMIT {
            return Err(CavityError::InvalidParameters(format!(
                "A~ = {} exceeds the weak-drive limit {WEAK_LIMIT}; use allow_strong to override",
                p.a_tilde
            )));
        }
        if p.a_tilde > WEAK_WARNING {
            warn!("A~ = {:.3} is above {WEAK_WARNING}; weak-drive formulas are approximate", p.a_tilde);
        }
        Ok(p)
    }

    /// Same as [`new`](Self::new) but accepts any `A~`, for comparisons
    /// outside the formal weak regime.
    pub fn allow_strong(amplitude: f64, l0: f64, q: u32) -> Result<Self> {
        let p = Self::new_unchecked(amplitude, l0, q)?;
        if p.a_tilde > WEAK_WARNING {
            warn!("A~ = {:.3} used outside the weak-drive regime", p.a_tilde);
        }
        Ok(p)
    }

    fn new_unchecked(amplitude: f64, l0: f64, q: u32) -> Result<Self> {
        if !(l0 > 0.0) || !(amplitude >= 0.0) || !amplitude.is_finite() || q == 0 {
            return Err(CavityError::InvalidParameters(format!(
                "weak drive needs L0 > 0, A >= 0, q >= 1 (got L0 = {l0}, A = {amplitude}, q = {q})"
            )));
        }
        Ok(WeakDriveParams {
            amplitude,
            l0,
            q,
            a_tilde: PI * amplitude / l0,
        })
    }

    pub fn scale(&self, x: f64) -> f64 {
        PI * x / self.l0
    }

    pub fn unscale(&self, x_tilde: f64) -> f64 {
        x_tilde * self.l0 / PI
    }

    /// `2 q A~ n`, the exponent shared by every weak-drive formula.
    pub fn exponent(&self, n: f64) -> f64 {
        2.0 * self.q as f64 * self.a_tilde * n
    }
}

/// Scaled weak-drive coordinate of ring point `x` sampled at `t_ref` for
/// `z = L0 + A sin(q pi t / L0 + φ)`. Result lies in `[0, 2 pi)`.
pub fn scaled_coordinate(x: f64, t_ref: f64, phase: f64, q: u32, l0: f64) -> f64 {
    let raw = PI * x / l0 - PI * t_ref / l0 - phase / q as f64 - PI;
    raw.rem_euclid(2.0 * PI)
}

/// Inverse of [`scaled_coordinate`], onto the ring `[-L0, L0)`.
pub fn ring_coordinate(x_tilde: f64, t_ref: f64, phase: f64, q: u32, l0: f64) -> f64 {
    let x = (x_tilde + PI * t_ref / l0 + phase / q as f64 + PI) * l0 / PI;
    let c = 2.0 * l0;
    let r = (x + l0).rem_euclid(c) - l0;
    if r >= l0 {
        -l0
    } else {
        r
    }
}

/// The weak direct map `x' = 2 L0 - 2 z(t0 + L0 - x) + x` (unwrapped).
pub fn weak_map_step(p: &DriveProtocol, l0: f64, t0: f64, x: f64) -> Result<f64> {
    let (z, _) = p.evaluate(t0 + l0 - x)?;
    Ok(2.0 * l0 - 2.0 * z + x)
}

/// `(2/q) atan(e^s tan(q x~ / 2))` continued across the poles of `tan` so the
/// result is a continuous, increasing function of `x~`.
fn continued_atan(x_tilde: f64, s: f64, q: u32) -> f64 {
    let qf = q as f64;
    let theta = 0.5 * qf * x_tilde;
    let k = (theta / PI).round();
    let base = theta - k * PI;
    let angle = if (base.abs() - 0.5 * PI).abs() < 1e-15 {
        base
    } else {
        (s.exp() * base.tan()).atan()
    };
    2.0 * (angle + k * PI) / qf
}

/// Forward weak solution `x~_n = (2/q) atan(e^{2 q A~ n} tan(q x~_0 / 2))`.
pub fn weak_forward(x_tilde0: f64, n: f64, params: &WeakDriveParams) -> f64 {
    continued_atan(x_tilde0, params.exponent(n), params.q)
}

/// Inverse weak map `x~_0 = (2/q) atan(e^{-2 q A~ n} tan(q x~_n / 2))`.
pub fn weak_inverse_g(x_tilde_n: f64, n: f64, params: &WeakDriveParams) -> f64 {
    continued_atan(x_tilde_n, -params.exponent(n), params.q)
}

/// `g' = 1 / (cosh(2 q A~ n) + sinh(2 q A~ n) cos(q x~_n))`.
pub fn weak_g_prime(x_tilde_n: f64, n: f64, params: &WeakDriveParams) -> f64 {
    let s = params.exponent(n);
    1.0 / (s.cosh() + s.sinh() * (params.q as f64 * x_tilde_n).cos())
}

/// Total classical energy for an initially uniform density:
/// `E0 cosh(2 q A~ n)`.
pub fn classical_energy_weak(e0: f64, n: f64, params: &WeakDriveParams) -> f64 {
    e0 * params.exponent(n).cosh()
}

/// Vacuum energy density on the ring of a cavity of length `length` driven
/// at resonance order `q`:
/// `-pi q^2 / (48 L^2) + pi (q^2 - 1) / (48 L^2) g'^2`, with `n = t / 2L`
/// and scaled coordinate `x~ = pi x / L`.
pub fn casimir_density(x_tilde: f64, t: f64, amplitude: f64, q: u32, length: f64) -> f64 {
    let qf = q as f64;
    let base = PI / (48.0 * length * length);
    if q == 1 {
        return -base;
    }
    let params = WeakDriveParams {
        amplitude,
        l0: length,
        q,
        a_tilde: PI * amplitude / length,
    };
    let g = weak_g_prime(x_tilde, t / (2.0 * length), &params);
    -qf * qf * base + (qf * qf - 1.0) * base * g * g
}

/// `-pi q^2 / (24 L) + pi (q^2 - 1) / (24 L) cosh(pi q A t / L^2)`.
pub fn casimir_energy(t: f64, amplitude: f64, q: u32, length: f64) -> f64 {
    let qf = q as f64;
    let base = PI / (24.0 * length);
    let arg = PI * qf * amplitude * t / (length * length);
    -qf * qf * base + (qf * qf - 1.0) * base * arg.cosh()
}

/// Time at which the order-`q` Casimir energy changes sign:
/// `pi q A t / L^2 = arccosh(q^2 / (q^2 - 1))`.
pub fn casimir_sign_change_time(amplitude: f64, q: u32, length: f64) -> Option<f64> {
    if q < 2 || !(amplitude > 0.0) {
        return None;
    }
    let qf = q as f64;
    let arg = (qf * qf / (qf * qf - 1.0)).acosh();
    Some(arg * length * length / (PI * qf * amplitude))
}

/// Vacuum energy density from Moore's function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenericCasimir {
    pub value: f64,
    pub r_prime: f64,
    /// The difference stencil straddles a kink of `R'` inherited from the
    /// seed interval; the value there is not meaningful.
    pub crosses_break: bool,
    /// Estimated relative rounding error of the derivative terms exceeds
    /// `1e-6`.
    pub ill_conditioned: bool,
}

/// `-(1 / 24 pi) [R'''/R' - 3/2 (R''/R')^2 + pi^2/2 R'^2]` at `u = t - x`.
/// `R'` is exact; `R''`, `R'''` use five-point differences of `R'` with step
/// `C / 2^14`, `C = 2 z(0)`.
pub fn casimir_density_generic(p: &DriveProtocol, x: f64, t: f64) -> Result<GenericCasimir> {
    let (z0, _) = p.evaluate(0.0)?;
    let h = 2.0 * z0 / 16384.0;
    let u = t - x;
    let mut rp = [0.0; 5];
    let mut steps = [0i64; 5];
    for (i, k) in (-2i32..=2).enumerate() {
        let v = moore_r(p, u + k as f64 * h)?;
        rp[i] = v.r_prime;
        steps[i] = v.steps;
    }
    let crosses_break = steps.iter().any(|&s| s != steps[2]);
    let r1 = rp[2];
    // Difference against the centre value first so a flat R' gives exact zeros.
    let d: Vec<f64> = rp.iter().map(|v| v - r1).collect();
    let r2 = (d[0] - 8.0 * d[1] + 8.0 * d[3] - d[4]) / (12.0 * h);
    let r3 = (-d[0] + 16.0 * d[1] + 16.0 * d[3] - d[4]) / (12.0 * h * h);
    let bracket = r3 / r1 - 1.5 * (r2 / r1).powi(2) + 0.5 * PI * PI * r1 * r1;
    // Each R' carries roughly one rounding error per bootstrap step.
    let eps = f64::EPSILON * (steps[2].unsigned_abs() as f64 + 2.0);
    let noise = eps * (rp[0].abs() + 16.0 * rp[1].abs() + 30.0 * rp[2].abs() + 16.0 * rp[3].abs() + rp[4].abs())
        / (12.0 * h * h * r1.abs());
    let ill_conditioned = noise > 1e-6 * bracket.abs();
    Ok(GenericCasimir {
        value: -bracket / (24.0 * PI),
        r_prime: r1,
        crosses_break,
        ill_conditioned,
    })
}

/// Wavevector gain `((1 + v) / (1 - v))^{t/T}` after time `t` on a fixed-point
/// trajectory with mirror speed `v` at each reflection.
pub fn doppler_exponent(v: f64, t: f64, period: f64) -> f64 {
    (((1.0 + v).ln() - (1.0 - v).ln()) * t / period).exp()
}

/// Small-speed form `e^{2 v t / T}`.
pub fn doppler_exponent_small(v: f64, t: f64, period: f64) -> f64 {
    (2.0 * v * t / period).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEstimates {
    /// `e^{2 Q v}`, the largest compression before cavity losses win.
    pub max_compression: f64,
    /// Net gain requires `1/Q < 2v`.
    pub gain_feasible: bool,
    /// `e^{2 Q_M v}`, the cap set by mirror-modulation noise.
    pub noise_compression: f64,
}

pub fn sweep_estimates(finesse: f64, speed: f64, modulation_quality: f64) -> Result<SweepEstimates> {
    if !(finesse > 0.0) || !(modulation_quality > 0.0) || !(0.0..1.0).contains(&speed) {
        return Err(CavityError::InvalidParameters(format!(
            "sweep estimates need Q > 0, Q_M > 0, 0 <= v < 1 (got {finesse}, {modulation_quality}, {speed})"
        )));
    }
    Ok(SweepEstimates {
        max_compression: (2.0 * finesse * speed).exp(),
        gain_feasible: 1.0 / finesse < 2.0 * speed,
        noise_compression: (2.0 * modulation_quality * speed).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a_tilde: f64, q: u32) -> WeakDriveParams {
        WeakDriveParams::new(a_tilde / PI, 1.0, q).unwrap()
    }

    #[test]
    fn rejects_strong_drive() {
        assert!(WeakDriveParams::new(0.1, 1.0, 1).is_err());
        assert!(WeakDriveParams::allow_strong(0.1, 1.0, 1).is_ok());
    }

    #[test]
    fn inverse_g_examples() {
        let p = params(0.1, 1);
        assert_eq!(weak_inverse_g(1.234, 0.0, &p), 1.234);
        for n in [1.0, 5.0, 40.0] {
            assert!((weak_inverse_g(PI, n, &p) - PI).abs() < 1e-14);
        }
        let v = weak_inverse_g(PI / 2.0, 5.0, &p);
        assert!((v - 2.0 * (-1f64).exp().atan()).abs() < 1e-14);
        assert!((v - 0.705_026_843_555_238).abs() < 1e-12);
    }

    #[test]
    fn g_prime_limits() {
        let p = params(0.1, 1);
        assert_eq!(weak_g_prime(0.7, 0.0, &p), 1.0);
        assert!((weak_g_prime(PI, 3.0, &p) - (0.6f64).exp()).abs() < 1e-12);
        assert!((weak_g_prime(0.0, 3.0, &p) - (-0.6f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn branch_continuation_is_monotone() {
        let p = params(0.15, 3);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=2000 {
            let x = -2.0 * PI + 4.0 * PI * i as f64 / 2000.0;
            let g = weak_inverse_g(x, 4.0, &p);
            assert!(g >= prev, "{x}");
            prev = g;
        }
    }

    #[test]
    fn energy_examples() {
        let p = WeakDriveParams::allow_strong(0.1, 1.0, 1).unwrap();
        assert!((classical_energy_weak(1.0, 4.0, &p) - (0.8 * PI).cosh()).abs() < 1e-12);
        assert!(((0.8 * PI).cosh() - 6.213_143_265_672_656).abs() < 1e-12);
        assert_eq!(classical_energy_weak(2.5, 0.0, &p), 2.5);
    }

    #[test]
    fn casimir_examples() {
        for q in 1..=3 {
            assert!((casimir_density(0.4, 0.0, 0.01, q, 1.0) + PI / 48.0).abs() < 1e-15);
            assert!((casimir_energy(0.0, 0.01, q, 1.0) + PI / 24.0).abs() < 1e-15);
        }
        assert_eq!(casimir_energy(123.0, 0.01, 1, 2.0), -PI / 48.0);
        let e = casimir_energy(1.0 / (2.0 * PI * 0.01), 0.01, 2, 1.0);
        assert!((e - (-4.0 + 3.0 * 1f64.cosh()) * PI / 24.0).abs() < 1e-14);
        assert!((e - 0.0824).abs() < 1e-4);
        let far = casimir_density(0.0, 400.0, 0.01, 2, 1.0);
        assert!((far + 4.0 * PI / 48.0).abs() < 1e-9);
        let ts = casimir_sign_change_time(0.01, 2, 1.0).unwrap();
        assert!(casimir_energy(ts, 0.01, 2, 1.0).abs() < 1e-14);
    }

    #[test]
    fn generic_static_value() {
        let p = DriveProtocol::constant(1.3).unwrap();
        let g = casimir_density_generic(&p, 0.2, 3.7).unwrap();
        assert!((g.value + PI / (48.0 * 1.3 * 1.3)).abs() < 1e-12);
        assert!(!g.crosses_break);
    }

    #[test]
    fn weak_step_matches_sine_form() {
        let a = 0.001;
        let p = DriveProtocol::make_harmonic(1.0, a, PI, 0.0).unwrap();
        let w = WeakDriveParams::new(a, 1.0, 1).unwrap();
        for i in 0..20 {
            let x = -1.0 + 0.1 * i as f64;
            let step = weak_map_step(&p, 1.0, 0.0, x).unwrap();
            let xt = scaled_coordinate(x, 0.0, 0.0, 1, 1.0);
            let dt = w.scale(step - x);
            assert!((dt - 2.0 * w.a_tilde * xt.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_coordinate_round_trip() {
        for x in [-1.0, -0.3, 0.0, 0.999] {
            let s = scaled_coordinate(x, 2.0, 0.4, 2, 1.0);
            assert!((ring_coordinate(s, 2.0, 0.4, 2, 1.0) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn doppler_and_sweep() {
        assert_eq!(doppler_exponent(0.3, 0.0, 2.0), 1.0);
        assert_eq!(doppler_exponent(0.0, 5.0, 2.0), 1.0);
        assert!((doppler_exponent(1e-4, 2.0, 2.0) / doppler_exponent_small(1e-4, 2.0, 2.0) - 1.0).abs() < 1e-11);
        let s = sweep_estimates(100.0, 0.01, 50.0).unwrap();
        assert!((s.max_compression - 2f64.exp()).abs() < 1e-12);
        assert!(s.gain_feasible);
        let s = sweep_estimates(100.0, 0.0, 50.0).unwrap();
        assert_eq!(s.max_compression, 1.0);
        assert!(!s.gain_feasible);
        assert!(!sweep_estimates(50.0, 0.01, 1.0).unwrap().gain_feasible);
    }
}
