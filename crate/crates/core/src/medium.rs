//! Semiclassical propagation through a cavity whose permittivity and
//! permeability are switched piecewise-constantly in space and time.
//!
//! Right-moving characteristics travel at `1/sqrt(eps mu)`. Along them the
//! fast phase is constant and `sqrt(eps/mu) A~^2` is conserved. A spatial
//! boundary keeps the frequency and rescales the wavevector; a temporal
//! switch keeps the wavevector and rescales the frequency. Back-scattering
//! is ignored.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::protocol::DriveProtocol;

/// A validity warning fires when the carrier period exceeds this fraction of
/// the shortest switch interval (or the wavelength that of the narrowest
/// region).
pub const SEMICLASSICAL_RATIO: f64 = 1.0 / 20.0;

/// Events closer than this (relative) to the target time count as reached.
const SLACK: f64 = 1e-12;

/// Guard against runaway loops on a degenerate schedule.
const MAX_EVENTS: usize = 10_000_000;

/// A piecewise-constant function of time.
///
/// `levels` holds `(switch time, value)` pairs with increasing switch times.
/// With a `period`, switch times are offsets in `[0, period)` measured from
/// `origin` and the pattern repeats; otherwise they are absolute and the
/// first value also holds before the first switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepLaw {
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default)]
    pub origin: f64,
    pub levels: Vec<(f64, f64)>,
}

impl StepLaw {
    pub fn constant(value: f64) -> Self {
        StepLaw {
            period: None,
            origin: 0.0,
            levels: vec![(0.0, value)],
        }
    }

    /// Two-level periodic law: `high` on `[origin, origin + duty)` modulo
    /// `period`, `low` otherwise.
    pub fn square(period: f64, origin: f64, duty: f64, high: f64, low: f64) -> Self {
        StepLaw {
            period: Some(period),
            origin,
            levels: vec![(0.0, high), (duty, low)],
        }
    }

    fn check(&self, what: &str) -> Result<()> {
        let bad = |m: String| Err(CavityError::InvalidMedium(format!("{what}: {m}")));
        if self.levels.is_empty() {
            return bad("no levels".into());
        }
        if !self.origin.is_finite() {
            return bad("non-finite origin".into());
        }
        for (i, &(s, v)) in self.levels.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("value {v} must be positive and finite"));
            }
            if !s.is_finite() {
                return bad("non-finite switch time".into());
            }
            if i > 0 && s <= self.levels[i - 1].0 {
                return bad("switch times must increase".into());
            }
        }
        if let Some(p) = self.period {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("period {p} must be positive"));
            }
            let (first, last) = (self.levels[0].0, self.levels[self.levels.len() - 1].0);
            if first < 0.0 || last >= p {
                return bad("periodic switch offsets must lie in [0, period)".into());
            }
        }
        Ok(())
    }

    /// Value at `t`; `before` selects the left limit at a switch.
    pub fn value(&self, t: f64, before: bool) -> f64 {
        let slack = SLACK * t.abs().max(1.0);
        let probe = |s: f64, tau: f64| if before { s < tau - slack } else { s <= tau + slack };
        match self.period {
            None => {
                let tau = t - self.origin;
                let idx = self.levels.partition_point(|&(s, _)| probe(s, tau));
                self.levels[idx.saturating_sub(1)].1
            }
            Some(p) => {
                let mut tau = (t - self.origin).rem_euclid(p);
                // A switch at offset 0 can show up as tau just under p (or
                // just over 0); move tau to the side the limit asks for.
                if !before && tau > p - slack {
                    tau -= p;
                } else if before && tau < slack {
                    tau += p;
                }
                let idx = self.levels.partition_point(|&(s, _)| probe(s, tau));
                if idx == 0 {
                    self.levels[self.levels.len() - 1].1
                } else {
                    self.levels[idx - 1].1
                }
            }
        }
    }

    /// First switch strictly after `t` (beyond the slack), if any.
    pub fn next_switch(&self, t: f64) -> Option<f64> {
        let slack = SLACK * t.abs().max(1.0);
        match self.period {
            None => self
                .levels
                .iter()
                .map(|&(s, _)| s + self.origin)
                .find(|&s| s > t + slack),
            Some(p) => {
                let k = ((t - self.origin) / p).floor();
                let base = self.origin + k * p;
                (0..3)
                    .flat_map(|j| self.levels.iter().map(move |&(s, _)| base + j as f64 * p + s))
                    .find(|&s| s > t + slack)
            }
        }
    }

    /// Shortest gap between consecutive switches, if the law switches at all.
    fn min_interval(&self) -> Option<f64> {
        if self.levels.len() < 2 && self.period.is_none() {
            return None;
        }
        let mut gaps: Vec<f64> = self.levels.windows(2).map(|w| w[1].0 - w[0].0).collect();
        if let Some(p) = self.period {
            if self.levels.len() == 1 {
                return None;
            }
            gaps.push(p - self.levels[self.levels.len() - 1].0 + self.levels[0].0);
        }
        gaps.into_iter().reduce(f64::min)
    }
}

/// A spatial region `[x_lo, x_hi)` of the ring with its material laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_lo: f64,
    pub x_hi: f64,
    pub epsilon: StepLaw,
    pub mu: StepLaw,
}

/// Material parameters at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Material {
    epsilon: f64,
    mu: f64,
}

impl Material {
    const VACUUM: Material = Material { epsilon: 1.0, mu: 1.0 };

    fn index(&self) -> f64 {
        (self.epsilon * self.mu).sqrt()
    }

    /// `sqrt(eps / mu)`, the weight in the conserved combination.
    fn admittance(&self) -> f64 {
        (self.epsilon / self.mu).sqrt()
    }
}

/// Ring `[-L, L)` of circumference `2L` with modulated regions. Points not
/// covered by a region are vacuum (`eps = mu = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSchedule {
    pub half_length: f64,
    pub regions: Vec<Region>,
    /// Length/time scale over which switches are formally adiabatic.
    #[serde(default)]
    pub smoothness: Option<f64>,
}

impl MediumSchedule {
    pub fn new(half_length: f64, mut regions: Vec<Region>, smoothness: Option<f64>) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(CavityError::InvalidMedium(format!(
                "half length {half_length} must be positive"
            )));
        }
        regions.sort_by(|a, b| a.x_lo.total_cmp(&b.x_lo));
        for (i, r) in regions.iter().enumerate() {
            if !(r.x_lo < r.x_hi) || r.x_lo < -half_length || r.x_hi > half_length {
                return Err(CavityError::InvalidMedium(format!(
                    "region [{}, {}) must be non-empty and inside [-{half_length}, {half_length})",
                    r.x_lo, r.x_hi
                )));
            }
            if i > 0 && r.x_lo < regions[i - 1].x_hi {
                return Err(CavityError::InvalidMedium(format!(
                    "regions overlap at x = {}",
                    r.x_lo
                )));
            }
            r.epsilon.check("epsilon")?;
            r.mu.check("mu")?;
        }
        if let Some(s) = smoothness {
            if !(s > 0.0) {
                return Err(CavityError::InvalidMedium("smoothness must be positive".into()));
            }
        }
        Ok(MediumSchedule {
            half_length,
            regions,
            smoothness,
        })
    }

    /// Static vacuum ring.
    pub fn uniform(half_length: f64) -> Result<Self> {
        Self::new(half_length, Vec::new(), None)
    }

    /// The two-region construction: region A = `[-L, 0)` held at `n0`,
    /// region B = `[0, L)` switching to `n1` on `[origin, origin + duty)`
    /// modulo `period`, and `n0` otherwise. Only `eps` is modulated.
    pub fn two_region(half_length: f64, n0: f64, n1: f64, period: f64, origin: f64, duty: f64) -> Result<Self> {
        let l = half_length;
        Self::new(
            l,
            vec![
                Region {
                    x_lo: -l,
                    x_hi: 0.0,
                    epsilon: StepLaw::constant(n0 * n0),
                    mu: StepLaw::constant(1.0),
                },
                Region {
                    x_lo: 0.0,
                    x_hi: l,
                    epsilon: StepLaw::square(period, origin, duty, n1 * n1, n0 * n0),
                    mu: StepLaw::constant(1.0),
                },
            ],
            None,
        )
    }

    fn region_index(&self, x: f64) -> Option<usize> {
        let i = self.regions.partition_point(|r| r.x_lo <= x);
        (i > 0 && x < self.regions[i - 1].x_hi).then(|| i - 1)
    }

    fn material(&self, region: Option<usize>, t: f64, before: bool) -> Material {
        match region {
            None => Material::VACUUM,
            Some(i) => {
                let r = &self.regions[i];
                Material {
                    epsilon: r.epsilon.value(t, before),
                    mu: r.mu.value(t, before),
                }
            }
        }
    }

    /// Refractive index `n(t, x)`.
    pub fn index(&self, t: f64, x: f64) -> f64 {
        self.material(self.region_index(self.wrap(x)), t, false).index()
    }

    /// Admittance `sqrt(eps/mu)` at `(t, x)`.
    pub fn admittance(&self, t: f64, x: f64) -> f64 {
        self.material(self.region_index(self.wrap(x)), t, false).admittance()
    }

    fn wrap(&self, x: f64) -> f64 {
        let l = self.half_length;
        if (-l..l).contains(&x) {
            return x;
        }
        let r = (x + l).rem_euclid(2.0 * l) - l;
        if r >= l {
            -l
        } else {
            r
        }
    }

    /// Next boundary strictly ahead of `x` (region edge or the seam at `L`).
    fn next_boundary(&self, x: f64) -> f64 {
        let mut best = self.half_length;
        for r in &self.regions {
            for b in [r.x_lo, r.x_hi] {
                if b > x && b < best {
                    best = b;
                }
            }
        }
        best
    }

    /// Shortest time between switches and narrowest region, for the validity
    /// monitor.
    fn scales(&self) -> (Option<f64>, Option<f64>) {
        let mut dt: Option<f64> = self.smoothness;
        let mut dx: Option<f64> = self.smoothness;
        let min = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        for r in &self.regions {
            dt = min(dt, min(r.epsilon.min_interval(), r.mu.min_interval()));
            dx = min(dx, Some(r.x_hi - r.x_lo));
        }
        (dt, dx)
    }
}

/// One right-moving characteristic carrying a packet envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicState {
    pub t: f64,
    /// Ring coordinate in `[-L, L)`.
    pub x: f64,
    /// Slow envelope `A~`.
    pub amplitude: f64,
    /// Fast phase; constant along the characteristic.
    pub phase: f64,
    /// Local carrier frequency.
    pub omega: f64,
    /// Local carrier wavevector.
    pub k: f64,
    /// Number of passes through the seam at `x = L`.
    #[serde(default)]
    pub laps: i64,
}

impl CharacteristicState {
    /// A packet launched at `(t, x)` with carrier frequency `omega`; the
    /// wavevector is set from the local index.
    pub fn launch(m: &MediumSchedule, t: f64, x: f64, amplitude: f64, omega: f64) -> Self {
        let x = m.wrap(x);
        CharacteristicState {
            t,
            x,
            amplitude,
            phase: 0.0,
            omega,
            k: m.index(t, x) * omega,
            laps: 0,
        }
    }

    /// Unwrapped position `x + 2L * laps`.
    pub fn unwrapped(&self, half_length: f64) -> f64 {
        self.x + 2.0 * half_length * self.laps as f64
    }

    /// `sqrt(eps/mu) A~^2` at the current point.
    pub fn invariant(&self, m: &MediumSchedule) -> f64 {
        m.admittance(self.t, self.x) * self.amplitude * self.amplitude
    }
}

/// What happened at a recorded event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MediumEventKind {
    Boundary,
    Switch,
    /// Spatial and temporal change at the same point.
    Both,
    Seam,
    Target,
}

/// Output of [`trace_characteristic_recorded`]: the final state, the state
/// after each event, and the validity verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumTrace {
    pub state: CharacteristicState,
    pub events: Vec<(MediumEventKind, CharacteristicState)>,
    /// False if the carrier was ever too slow for the semiclassical picture.
    pub semiclassical: bool,
}

fn advance(m: &MediumSchedule, s: CharacteristicState, t_target: f64, record: bool) -> Result<MediumTrace> {
    if !(t_target >= s.t) {
        return Err(CavityError::InvalidParameters(format!(
            "target time {t_target} precedes the state time {}",
            s.t
        )));
    }
    if !(s.omega > 0.0 && s.amplitude.is_finite()) {
        return Err(CavityError::InvalidParameters(
            "characteristic needs a positive carrier frequency".into(),
        ));
    }
    let (dt_min, dx_min) = m.scales();
    let mut ok = true;
    let mut check = |st: &CharacteristicState| {
        let period_ok = dt_min.is_none_or(|d| 2.0 * PI / st.omega <= SEMICLASSICAL_RATIO * d);
        let wave_ok = dx_min.is_none_or(|d| 2.0 * PI / st.k <= SEMICLASSICAL_RATIO * d);
        if ok && !(period_ok && wave_ok) {
            warn!(
                "carrier (omega = {:.4}, k = {:.4}) is not fast compared with the schedule; \
                 the semiclassical picture is unreliable",
                st.omega, st.k
            );
            ok = false;
        }
    };
    let mut cur = s;
    cur.x = m.wrap(cur.x);
    check(&cur);
    let mut events = Vec::new();
    for _ in 0..MAX_EVENTS {
        let slack = SLACK * t_target.abs().max(1.0);
        let region = m.region_index(cur.x);
        let here = m.material(region, cur.t, false);
        let n = here.index();
        let xb = m.next_boundary(cur.x);
        let t_space = cur.t + (xb - cur.x) * n;
        let t_switch = region
            .and_then(|i| {
                let r = &m.regions[i];
                match (r.epsilon.next_switch(cur.t), r.mu.next_switch(cur.t)) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            })
            .unwrap_or(f64::INFINITY);
        let t_event = t_space.min(t_switch);
        if t_event >= t_target - slack {
            cur.x = m.wrap(cur.x + (t_target - cur.t) / n);
            cur.t = t_target;
            if record {
                events.push((MediumEventKind::Target, cur));
            }
            return Ok(MediumTrace {
                state: cur,
                events,
                semiclassical: ok,
            });
        }
        let spatial = t_space <= t_switch + slack;
        let t_new = t_event;
        let mut kind = MediumEventKind::Switch;
        if spatial {
            cur.x = xb;
            if xb >= m.half_length {
                cur.x = -m.half_length;
                cur.laps += 1;
            }
            kind = MediumEventKind::Boundary;
        } else {
            cur.x = m.wrap(cur.x + (t_new - cur.t) / n);
        }
        cur.t = t_new;
        let new_region = m.region_index(cur.x);
        // Left limit of the new region's laws: the medium the packet sees
        // right after crossing, before any simultaneous switch.
        let mid = m.material(new_region, cur.t, true);
        let after = m.material(new_region, cur.t, false);
        if spatial && mid != here {
            cur.k = mid.index() * cur.omega;
        }
        if after != mid {
            cur.omega = cur.k / after.index();
            if spatial {
                kind = MediumEventKind::Both;
            }
        }
        if spatial && mid == here && after == mid && new_region == region {
            kind = MediumEventKind::Seam;
        }
        cur.amplitude *= (here.admittance() / after.admittance()).sqrt();
        check(&cur);
        if record {
            events.push((kind, cur));
        }
    }
    Err(CavityError::InvalidMedium(format!(
        "more than {MAX_EVENTS} events before t = {t_target}"
    )))
}

/// Follows one right-moving characteristic to `t_target`.
pub fn trace_characteristic(m: &MediumSchedule, s: CharacteristicState, t_target: f64) -> Result<CharacteristicState> {
    Ok(advance(m, s, t_target, false)?.state)
}

/// [`trace_characteristic`] keeping every intermediate event.
pub fn trace_characteristic_recorded(m: &MediumSchedule, s: CharacteristicState, t_target: f64) -> Result<MediumTrace> {
    advance(m, s, t_target, true)
}

/// Traces many characteristics in parallel.
pub fn trace_many(m: &MediumSchedule, states: &[CharacteristicState], t_target: f64) -> Result<Vec<CharacteristicState>> {
    states
        .par_iter()
        .map(|&s| trace_characteristic(m, s, t_target))
        .collect()
}

/// Weak-modulation map for a narrow region of width `A` and index depth `nu`:
/// `x' = x + 2(L0 - L) + A nu cos(pi x / L0)` (unwrapped).
pub fn medium_weak_map(l: f64, l0: f64, width: f64, nu: f64, x: f64) -> f64 {
    x + 2.0 * (l0 - l) + width * nu * (PI * x / l0).cos()
}

/// Derivative of [`medium_weak_map`] with respect to `x`.
pub fn medium_weak_multiplier(l0: f64, width: f64, nu: f64, x: f64) -> f64 {
    1.0 - PI * width * nu / l0 * (PI * x / l0).sin()
}

/// Harmonic mirror drive whose weak map, read at `t0`, coincides with the
/// medium map of strength `A nu`: amplitude `A nu / 2`, `Ω = pi / L0` and the
/// phase chosen so that the mirror term becomes `+A nu cos(pi x / L0)`.
pub fn equivalent_mirror(l: f64, l0: f64, strength: f64, t0: f64) -> Result<DriveProtocol> {
    let omega = PI / l0;
    DriveProtocol::make_harmonic(l, 0.5 * strength, omega, 0.5 * PI - omega * t0)
}
