//! Null-line propagation on the unfolded ring `[-z(t), z(t))`.
//!
//! Rays move with `dx/dt = +1`. Reaching `x = z(t)` (the moving mirror) the
//! coordinate wraps to `-z(t)`; crossing `x = 0` (the fixed mirror) leaves it
//! continuous. Both events flip the parity of the carried field. A state
//! sitting exactly on `x = 0` or `x = -z(t)` is taken to be just after the
//! corresponding event.

use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::protocol::DriveProtocol;
use crate::roots::increasing_root;

/// A sample of a null line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub t: f64,
    pub x: f64,
    /// `+1` or `-1`; always `(-1)^reflections`.
    pub parity: i8,
    /// Net number of sign flips. Backward propagation decrements it.
    pub reflections: i64,
}

impl RayState {
    pub fn new(t: f64, x: f64) -> Self {
        RayState {
            t,
            x,
            parity: 1,
            reflections: 0,
        }
    }

    fn flip(&mut self, forward: bool) {
        self.parity = -self.parity;
        self.reflections += if forward { 1 } else { -1 };
    }
}

/// Which boundary produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    MovingMirror,
    FixedMirror,
}

/// A reflection from the moving mirror, with the mirror state at that time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Encounter {
    pub t: f64,
    pub z: f64,
    pub zdot: f64,
}

impl Encounter {
    /// Forward Doppler factor `(1 + zdot) / (1 - zdot)`; the derivative of the
    /// outgoing coordinate with respect to the incoming one.
    pub fn doppler(&self) -> f64 {
        (1.0 + self.zdot) / (1.0 - self.zdot)
    }

    pub fn log_doppler(&self) -> f64 {
        (1.0 + self.zdot).ln() - (1.0 - self.zdot).ln()
    }
}

/// Outcome of a propagation: final state plus every moving-mirror encounter.
#[derive(Debug, Clone, PartialEq)]
pub struct Flight {
    pub state: RayState,
    pub encounters: Vec<Encounter>,
}

impl Flight {
    /// Natural log of `d x_end / d x_start`. Positive factors for forward
    /// flights, reciprocal factors for backward ones.
    pub fn log_jacobian(&self, forward: bool) -> f64 {
        let s: f64 = self.encounters.iter().map(Encounter::log_doppler).sum();
        if forward {
            s
        } else {
            -s
        }
    }
}

/// Events this close to a flight's target time count as happening at the
/// target, which absorbs root-finding rounding at the endpoints.
fn event_slack(t_target: f64) -> f64 {
    1e-11 * t_target.abs().max(1.0)
}

fn horizon(needed: f64, end: f64) -> CavityError {
    CavityError::HorizonExceeded { needed, end }
}

/// `a + b` and its exact rounding error.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Time of the next moving-mirror encounter strictly after `ray.t`: the root
/// of the increasing `h(t) = ray.x + (t - ray.t) - z(t)`.
pub fn next_mirror_encounter(p: &DriveProtocol, ray: &RayState) -> Result<f64> {
    mirror_root(p, ray, ray.t - ray.x)
}

/// Root of `h(t) = (t - z(t)) - lag` where `lag = t_ray - x_ray`, possibly
/// carrying a compensation below the resolution of the ray state.
fn mirror_root(p: &DriveProtocol, ray: &RayState, lag: f64) -> Result<f64> {
    let (_, end) = p.domain();
    let (z0, _) = p.evaluate(ray.t)?;
    let h0 = ray.x - z0;
    if h0 >= 0.0 {
        return Err(CavityError::InvalidParameters(format!(
            "ray at x = {} is not inside the ring [-{z0}, {z0})",
            ray.x
        )));
    }
    // Grouped so the large constant part of z cancels against t first.
    let h = |t: f64| {
        let (base, osc, v) = p.eval_parts_unchecked(t);
        (((t - base) - lag) - osc, 1.0 - v)
    };
    let step_floor = 0.5 * p.min_length();
    let mut lo = ray.t;
    let mut hi = ray.t - h0;
    loop {
        if hi >= end {
            if end.is_finite() && h(end).0 >= 0.0 {
                hi = end;
                break;
            }
            return Err(horizon(hi, end));
        }
        let (hv, _) = h(hi);
        if hv >= 0.0 {
            break;
        }
        lo = hi;
        hi += (-hv).max(step_floor);
    }
    Ok(increasing_root(h, lo, hi))
}

/// Time of the previous encounter strictly before `ray.t` when tracing
/// backwards, where the ray sits at `x = -z(t)`: the root of the increasing
/// `k(t) = ray.x - (ray.t - t) + z(t)`. A ray exactly on `-z(ray.t)` returns
/// `ray.t` itself.
fn previous_mirror_encounter(p: &DriveProtocol, ray: &RayState) -> Result<f64> {
    let (start, _) = p.domain();
    let (z0, _) = p.evaluate(ray.t)?;
    let k0 = ray.x + z0;
    if k0 <= 0.0 {
        return Ok(ray.t);
    }
    let k = |t: f64| {
        let (z, v) = p.eval_unchecked(t);
        (ray.x - (ray.t - t) + z, 1.0 + v)
    };
    let step_floor = 0.5 * p.min_length();
    let mut hi = ray.t;
    let mut lo = ray.t - k0;
    loop {
        if lo < start {
            if start.is_finite() && k(start).0 <= 0.0 {
                lo = start;
                break;
            }
            return Err(horizon(lo, start));
        }
        let (kv, _) = k(lo);
        if kv <= 0.0 {
            break;
        }
        hi = lo;
        lo -= kv.max(step_floor);
    }
    Ok(increasing_root(k, lo, hi))
}

/// Propagates forward to `t_target`, returning every moving-mirror encounter.
/// Events at exactly `t_target` are applied.
pub fn fly(p: &DriveProtocol, ray: RayState, t_target: f64) -> Result<Flight> {
    fly_with(p, ray, t_target, |_, _| {})
}

fn fly_with<F>(p: &DriveProtocol, ray: RayState, t_target: f64, mut on_event: F) -> Result<Flight>
where
    F: FnMut(EventKind, &RayState),
{
    if t_target < ray.t {
        return Err(CavityError::InvalidParameters(format!(
            "forward target {t_target} precedes ray time {}",
            ray.t
        )));
    }
    let (_, end) = p.domain();
    if t_target >= end {
        return Err(horizon(t_target, end));
    }
    let mut s = ray;
    let mut encounters = Vec::new();
    // The true position is `s.x + (t - s.t) + comp`: `comp` keeps the
    // rounding of -z at a wrap, of the encounter time, and of the crossing
    // time at x = 0, so long compressing orbits do not accumulate ulps of
    // the O(1) event coordinates.
    let mut comp = 0.0;
    loop {
        // Fixed mirror: only reachable from the left half.
        let t_zero = if s.x < 0.0 { s.t - s.x } else { f64::INFINITY };
        // Moving mirror: skip the solve if the ray cannot get there in time.
        let (z_target, _) = p.evaluate(t_target)?;
        let reaches_mirror = s.x + (t_target - s.t) >= z_target;
        let t_mirror = if reaches_mirror {
            mirror_root(p, &s, (s.t - s.x) - comp)?
        } else {
            f64::INFINITY
        };
        if t_zero.min(t_mirror) > t_target + event_slack(t_target) {
            // An event inside the slack leaves the state on its boundary.
            if s.t < t_target {
                s.x = (s.x + (t_target - s.t)) + comp;
            }
            s.t = t_target;
            // Guard against rounding pushing the state onto the wrong side
            // of the half-open ring.
            if s.x >= z_target {
                s.x = -z_target;
                s.flip(true);
            }
            s.x = s.x.max(-z_target);
            return Ok(Flight {
                state: s,
                encounters,
            });
        }
        if t_zero <= t_mirror {
            let (hi, err) = two_sum(s.t, -s.x);
            comp = -(err - comp);
            debug_assert_eq!(hi, t_zero);
            s.t = t_zero;
            s.x = 0.0;
            s.flip(true);
            on_event(EventKind::FixedMirror, &s);
        } else {
            p.evaluate(t_mirror)?;
            let (base, osc, zdot) = p.eval_parts_unchecked(t_mirror);
            let (z, z_err) = two_sum(base, osc);
            // Residual of the encounter equation at the rounded root; the
            // exact root is t_mirror - r / (1 - v), which moves the later
            // position by r (1 + v) / (1 - v).
            let r = ((t_mirror - base) - ((s.t - s.x) - comp)) - osc;
            comp = -z_err + r * (1.0 + zdot) / (1.0 - zdot);
            s.t = t_mirror;
            s.x = -z;
            s.flip(true);
            encounters.push(Encounter { t: t_mirror, z, zdot });
            on_event(EventKind::MovingMirror, &s);
        }
    }
}

/// Propagates backward to `t_target <= ray.t`, undoing every event with time
/// in `(t_target, ray.t]`. A forward flight followed by a backward one
/// therefore returns the starting state.
pub fn fly_back(p: &DriveProtocol, ray: RayState, t_target: f64) -> Result<Flight> {
    if t_target > ray.t {
        return Err(CavityError::InvalidParameters(format!(
            "backward target {t_target} follows ray time {}",
            ray.t
        )));
    }
    let (start, _) = p.domain();
    if t_target < start {
        return Err(horizon(t_target, start));
    }
    let mut s = ray;
    let mut encounters = Vec::new();
    // A state on x = 0 is just after a fixed-mirror crossing at s.t.
    if s.x == 0.0 && s.t > t_target {
        s.flip(false);
    }
    // While tracing backwards x lives in (-z, z]: x = 0 after an undone
    // crossing sits on the negative side, x = z after an undone wrap.
    loop {
        let t_zero = if s.x > 0.0 { s.t - s.x } else { f64::NEG_INFINITY };
        let (z_target, _) = p.evaluate(t_target)?;
        let reaches_mirror = s.x - (s.t - t_target) <= -z_target;
        let t_mirror = if reaches_mirror {
            previous_mirror_encounter(p, &s)?
        } else {
            f64::NEG_INFINITY
        };
        if t_zero.max(t_mirror) <= t_target + event_slack(t_target) {
            s.x -= s.t - t_target;
            s.t = t_target;
            s.x = s.x.clamp(-z_target, z_target);
            if s.x == z_target {
                s.x = -z_target;
            }
            return Ok(Flight {
                state: s,
                encounters,
            });
        }
        if t_zero >= t_mirror {
            s.t = t_zero;
            s.x = 0.0;
            s.flip(false);
        } else {
            let (z, zdot) = p.evaluate(t_mirror)?;
            s.t = t_mirror;
            s.x = z;
            s.flip(false);
            encounters.push(Encounter { t: t_mirror, z, zdot });
        }
    }
}

/// Forward propagation returning only the final state.
pub fn advance(p: &DriveProtocol, ray: RayState, t_target: f64) -> Result<RayState> {
    Ok(fly(p, ray, t_target)?.state)
}

/// Backward propagation returning only the final state.
pub fn retreat(p: &DriveProtocol, ray: RayState, t_target: f64) -> Result<RayState> {
    Ok(fly_back(p, ray, t_target)?.state)
}

/// World line sampled at `n_samples` uniform times on `[ray.t, t_target]`
/// plus the post-event state of every reflection, ordered by time.
pub fn trace(
    p: &DriveProtocol,
    ray: RayState,
    t_target: f64,
    n_samples: usize,
) -> Result<Vec<RayState>> {
    let mut events = Vec::new();
    let flight = fly_with(p, ray, t_target, |_, s| events.push(*s))?;
    let mut out = Vec::with_capacity(n_samples + events.len());
    let mut cursor = ray;
    let mut ev = events.into_iter().peekable();
    for k in 0..n_samples {
        let t = if n_samples == 1 {
            ray.t
        } else {
            ray.t + (t_target - ray.t) * k as f64 / (n_samples - 1) as f64
        };
        while let Some(e) = ev.peek() {
            if e.t <= t {
                out.push(*e);
                cursor = *e;
                ev.next();
            } else {
                break;
            }
        }
        let s = if t == t_target {
            flight.state
        } else {
            advance(p, cursor, t)?
        };
        out.push(s);
        cursor = s;
    }
    out.extend(ev);
    Ok(out)
}
