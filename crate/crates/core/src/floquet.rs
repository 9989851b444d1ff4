//! The stroboscopic map: one period (or several) of ray flight sampled at a
//! fixed phase of the drive, its lift, inverse, fixed points and light cones.
//!
//! For a ray starting at `x` on the ring at `t0` the flight over `span` ends
//! at `x + span - 2 sum z(t_m)`. The lift used throughout adds back one
//! circumference per wrap and subtracts `w` circumferences, `w` being the
//! nearest integer to `span / C`:
//!
//! `F(x) = x + span - 2 sum (z(t_m) - z(t0)) - w C`.
//!
//! Each term vanishes when its encounter slides onto either end of the
//! flight, so `F` is continuous, strictly increasing and `F(x + C) = F(x) + C`.
//! For a single encounter over one resonant period this is the familiar
//! `x - 2 (z(t_m) - L0)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::protocol::DriveProtocol;
use crate::ray::{fly, fly_back, Flight, RayState};
use crate::roots::bisect;

/// Fixed points with `|multiplier - 1|` at most this are tangent.
pub const TANGENT_TOLERANCE: f64 = 1e-6;
/// Default lift resolution for fixed-point searches.
pub const DEFAULT_SAMPLES: usize = 2048;
/// Seam tolerance for the degree-one check.
pub const SEAM_TOLERANCE: f64 = 1e-9;
/// Fixed points are refined to this absolute accuracy.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;

/// Result of one stroboscopic flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapStep {
    /// Ring coordinate at the end of the flight.
    pub x: f64,
    /// Continuous lift value (see module docs).
    pub lift: f64,
    /// `d x_end / d x_start`, the Doppler product.
    pub multiplier: f64,
    pub log_multiplier: f64,
    /// Time of the last moving-mirror encounter, if any.
    pub t_m: Option<f64>,
    /// Mirror speed at that encounter.
    pub mirror_speed: Option<f64>,
    pub encounters: usize,
    pub parity: i8,
    pub reflections: i64,
}

/// Runs `f` on a protocol whose time origin sits at `t_a`, when a single
/// segment covers `[t_a, t_b]`. Keeping absolute times small preserves
/// digits when many periods are chained. Falls back to the global protocol
/// otherwise. The closure receives the protocol and the time offset.
fn with_local<T>(
    p: &DriveProtocol,
    t_a: f64,
    t_b: f64,
    f: impl FnOnce(&DriveProtocol, f64) -> Result<T>,
) -> Result<T> {
    let seg = p.segment_at(t_a)?;
    if t_a != 0.0 && seg.end >= t_b && seg.start <= t_a {
        let local = p.window_at(t_a)?;
        f(&local, t_a)
    } else {
        f(p, 0.0)
    }
}

fn assemble(
    x: f64,
    z_start: f64,
    span: f64,
    flight: &Flight,
    forward: bool,
    offset: f64,
) -> MapStep {
    let c = 2.0 * z_start;
    let w = (span / c).round();
    let drift: f64 = flight.encounters.iter().map(|e| e.z - z_start).sum();
    let lift = if forward {
        x + span - 2.0 * drift - w * c
    } else {
        x - span + 2.0 * drift + w * c
    };
    let log_multiplier = flight.log_jacobian(forward);
    let last = if forward {
        flight.encounters.last()
    } else {
        flight.encounters.first()
    };
    MapStep {
        x: flight.state.x,
        lift,
        multiplier: log_multiplier.exp(),
        log_multiplier,
        t_m: last.map(|e| e.t + offset),
        mirror_speed: last.map(|e| e.zdot),
        encounters: flight.encounters.len(),
        parity: flight.state.parity,
        reflections: flight.state.reflections,
    }
}

/// Flight from `t0` over `span` starting at ring coordinate `x`.
pub fn map_span(p: &DriveProtocol, t0: f64, span: f64, x: f64) -> Result<MapStep> {
    if !(span > 0.0) {
        return Err(CavityError::InvalidParameters(format!(
            "map span must be positive, got {span}"
        )));
    }
    with_local(p, t0, t0 + span, |q, off| {
        let (z0, _) = q.evaluate(t0 - off)?;
        let x = check_ring(x, z0)?;
        let flight = fly(q, RayState::new(t0 - off, x), t0 - off + span)?;
        Ok(assemble(x, z0, span, &flight, true, off))
    })
}

/// Inverse of [`map_span`]: the start coordinate at `t0` of the ray that sits
/// at `x1` at `t0 + span`.
pub fn inverse_span(p: &DriveProtocol, t0: f64, span: f64, x1: f64) -> Result<MapStep> {
    if !(span > 0.0) {
        return Err(CavityError::InvalidParameters(format!(
            "map span must be positive, got {span}"
        )));
    }
    with_local(p, t0, t0 + span, |q, off| {
        let t1 = t0 - off + span;
        let (z1, _) = q.evaluate(t1)?;
        let x1 = check_ring(x1, z1)?;
        let flight = fly_back(q, RayState::new(t1, x1), t0 - off)?;
        Ok(assemble(x1, z1, span, &flight, false, off))
    })
}

/// Accepts `x` on `[-z, z)`, snapping values a few ulps outside (left by a
/// previous step evaluated on a differently re-referenced law) onto the seam.
fn check_ring(x: f64, z: f64) -> Result<f64> {
    let tol = 1e-12 * z.max(1.0);
    if x.is_finite() && x >= -z && x < z {
        Ok(x)
    } else if x.is_finite() && ((x < -z && x >= -z - tol) || (x >= z && x < z + tol)) {
        Ok(-z)
    } else {
        Err(CavityError::InvalidParameters(format!(
            "x = {x} is outside the ring [-{z}, {z})"
        )))
    }
}

/// Wraps `x` onto `[-z, z)`, returning the wrapped value and the number of
/// circumferences removed.
pub fn wrap_ring(x: f64, z: f64) -> (f64, f64) {
    let c = 2.0 * z;
    let k = ((x + z) / c).floor();
    let mut r = x - k * c;
    // Rounding can land exactly on +z.
    if r >= z {
        r -= c;
        return (r, k + 1.0);
    }
    if r < -z {
        r = -z;
    }
    (r, k)
}

/// Drive period of the segment active at `t0`; `L0` is half of it.
pub fn drive_period(p: &DriveProtocol, t0: f64) -> Result<f64> {
    p.period_at(t0)
}

/// The one-period map `f`: `(x1, multiplier, t_m)`.
pub fn map_once(p: &DriveProtocol, t0: f64, x: f64) -> Result<(f64, f64, Option<f64>)> {
    let s = map_span(p, t0, drive_period(p, t0)?, x)?;
    Ok((s.x, s.multiplier, s.t_m))
}

/// `f^(k)` by tracing `k` drive periods in one flight.
pub fn map_periods(p: &DriveProtocol, t0: f64, periods: u32, x: f64) -> Result<MapStep> {
    let t = drive_period(p, t0)?;
    map_span(p, t0, periods as f64 * t, x)
}

/// The inverse one-period map `g = f^-1`: `(x0, multiplier of g)`.
pub fn inverse(p: &DriveProtocol, t0: f64, x1: f64) -> Result<(f64, f64)> {
    let s = inverse_span(p, t0, drive_period(p, t0)?, x1)?;
    Ok((s.x, s.multiplier))
}

/// `x_k = f^(k)(x)` for `k = 0..=n`, stepping one drive period at a time from
/// `t0 + kT` so non-periodic protocols (splices) are followed correctly.
pub fn iterate(p: &DriveProtocol, t0: f64, x: f64, n: usize) -> Result<Vec<f64>> {
    Ok(iterate_steps(p, t0, x, n)?.into_iter().map(|s| s.0).collect())
}

/// Like [`iterate`] but also returns each step's log multiplier (the first
/// entry carries 0).
pub fn iterate_steps(p: &DriveProtocol, t0: f64, x: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let t = drive_period(p, t0)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push((x, 0.0));
    let mut cur = x;
    for k in 0..n {
        let s = map_span(p, t0 + k as f64 * t, t, cur)?;
        cur = s.x;
        out.push((cur, s.log_multiplier));
    }
    Ok(out)
}

/// Undoes [`iterate`]: applies `g` `n` times walking back from `t0 + nT`.
pub fn iterate_inverse(p: &DriveProtocol, t0: f64, x_n: f64, n: usize) -> Result<Vec<f64>> {
    let t = drive_period(p, t0)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(x_n);
    let mut cur = x_n;
    for k in (0..n).rev() {
        cur = inverse_span(p, t0 + k as f64 * t, t, cur)?.x;
        out.push(cur);
    }
    Ok(out)
}

/// Stability class of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Tangent,
}

impl Stability {
    pub fn classify(multiplier: f64) -> Self {
        if multiplier < 1.0 - TANGENT_TOLERANCE {
            Stability::Stable
        } else if multiplier > 1.0 + TANGENT_TOLERANCE {
            Stability::Unstable
        } else {
            Stability::Tangent
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: f64,
    pub multiplier: f64,
    pub stability: Stability,
    /// 2 for a tangent touch (a merged stable/unstable pair), else 1.
    pub multiplicity: u8,
    /// Last moving-mirror encounter along the periodic orbit.
    pub t_m: Option<f64>,
    /// Mirror speed at that encounter.
    pub mirror_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub period: u32,
    pub points: Vec<FixedPoint>,
}

impl FixedPointSet {
    /// Number of fixed points counting tangent touches twice.
    pub fn count_with_multiplicity(&self) -> usize {
        self.points.iter().map(|p| p.multiplicity as usize).sum()
    }

    pub fn count(&self, stability: Stability) -> usize {
        self.points.iter().filter(|p| p.stability == stability).count()
    }
}

/// A tabulated lift of the `T_map` stroboscopic map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMap {
    pub t0: f64,
    /// Map period `q * T_drive`.
    pub t_map: f64,
    pub drive_period: f64,
    /// Number of drive periods per map step.
    pub periods: u32,
    /// Ring circumference `2 z(t0)`.
    pub circumference: f64,
    /// `(x, F(x))` on a uniform grid over `[-z(t0), z(t0))`.
    pub lift_samples: Vec<(f64, f64)>,
    pub multiplier_samples: Vec<f64>,
    /// Mismatch of `F(z - 0) - F(-z) - C`.
    pub seam_mismatch: f64,
    protocol: DriveProtocol,
}

impl CircleMap {
    /// Tabulates the map over `periods` drive periods at `n` points.
    pub fn tabulate(p: &DriveProtocol, t0: f64, periods: u32, n: usize) -> Result<Self> {
        if periods == 0 || n < 2 {
            return Err(CavityError::InvalidParameters(format!(
                "tabulation needs periods >= 1 and n >= 2 (got {periods}, {n})"
            )));
        }
        let drive_period = drive_period(p, t0)?;
        let t_map = periods as f64 * drive_period;
        let (z0, _) = p.evaluate(t0)?;
        let c = 2.0 * z0;
        let samples: Vec<MapStep> = (0..n)
            .into_par_iter()
            .map(|i| map_span(p, t0, t_map, -z0 + c * i as f64 / n as f64))
            .collect::<Result<_>>()?;
        let lift_samples: Vec<(f64, f64)> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (-z0 + c * i as f64 / n as f64, s.lift))
            .collect();
        for w in lift_samples.windows(2) {
            if !(w[1].1 > w[0].1) {
                return Err(CavityError::NonMonotoneLift { x: w[1].0 });
            }
        }
        // Approach the seam from below; the lift is Lipschitz with constant
        // max multiplier so the step contributes at most `m * delta`.
        let delta = c * 1e-13;
        let near_end = map_span(p, t0, t_map, z0 - delta)?;
        let seam_mismatch = (near_end.lift + near_end.multiplier * delta
            - (lift_samples[0].1 + c))
            .abs();
        if seam_mismatch > SEAM_TOLERANCE * c.max(1.0) {
            return Err(CavityError::NotPeriodic { t: t0 });
        }
        if !(near_end.lift < lift_samples[0].1 + c) || !(near_end.lift > lift_samples[n - 1].1) {
            return Err(CavityError::NonMonotoneLift { x: z0 });
        }
        Ok(CircleMap {
            t0,
            t_map,
            drive_period,
            periods,
            circumference: c,
            multiplier_samples: samples.iter().map(|s| s.multiplier).collect(),
            lift_samples,
            seam_mismatch,
            protocol: p.clone(),
        })
    }

    pub fn protocol(&self) -> &DriveProtocol {
        &self.protocol
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.circumference
    }

    /// Exact lift at any real `x`, recomputed by ray flight.
    pub fn lift(&self, x: f64) -> Result<f64> {
        let (r, k) = wrap_ring(x, self.half_length());
        Ok(self.step(r)?.lift + k * self.circumference)
    }

    /// Exact map step from ring coordinate `x`.
    pub fn step(&self, x: f64) -> Result<MapStep> {
        map_span(&self.protocol, self.t0, self.t_map, x)
    }

    /// Exact `F(x) - x`.
    pub fn displacement(&self, x: f64) -> Result<f64> {
        Ok(self.lift(x)? - x)
    }

    /// Finds every fixed point of the tabulated map modulo the ring.
    pub fn find_fixed_points(&self, period: u32) -> Result<FixedPointSet> {
        let n = self.lift_samples.len();
        let c = self.circumference;
        let z0 = self.half_length();
        // Sample grid closed with the periodic copy of the first node.
        let mut xs: Vec<f64> = self.lift_samples.iter().map(|s| s.0).collect();
        let mut ds: Vec<f64> = self.lift_samples.iter().map(|s| s.1 - s.0).collect();
        let mut ms = self.multiplier_samples.clone();
        xs.push(z0);
        ds.push(ds[0]);
        ms.push(ms[0]);
        let (dmin, dmax) = ds
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
        let k_lo = (dmin / c).floor() as i64;
        let k_hi = (dmax / c).ceil() as i64;
        let touch_tol = 1e-12 * c.max(1.0);

        let mut roots: Vec<(f64, u8)> = Vec::new();
        for k in k_lo..=k_hi {
            let shift = k as f64 * c;
            let d = |x: f64| -> f64 { self.displacement(x).unwrap_or(f64::NAN) - shift };
            for i in 0..n {
                let (a, b) = (xs[i], xs[i + 1]);
                let (da, db) = (ds[i] - shift, ds[i + 1] - shift);
                if da == 0.0 {
                    roots.push((a, 1));
                    continue;
                }
                let extremum = (ms[i] - 1.0) * (ms[i + 1] - 1.0) < 0.0;
                if !extremum {
                    if da * db < 0.0 {
                        roots.push((bisect(d, a, b, FIXED_POINT_TOLERANCE), 1));
                    }
                    continue;
                }
                // Locate the extremum of the displacement: its derivative is
                // the exact multiplier minus one.
                let slope = |x: f64| self.step(wrap_ring(x, z0).0).map(|s| s.multiplier - 1.0);
                let xe = bisect(
                    |x| slope(x).unwrap_or(f64::NAN),
                    a,
                    b,
                    FIXED_POINT_TOLERANCE,
                );
                let de = d(xe);
                if de.abs() <= touch_tol {
                    roots.push((xe, 2));
                    continue;
                }
                if da * de < 0.0 {
                    roots.push((bisect(d, a, xe, FIXED_POINT_TOLERANCE), 1));
                }
                if de * db < 0.0 {
                    roots.push((bisect(d, xe, b, FIXED_POINT_TOLERANCE), 1));
                }
            }
        }

        let mut points = Vec::with_capacity(roots.len());
        for (x, multiplicity) in roots {
            let x = wrap_ring(x, z0).0;
            let s = self.step(x)?;
            let stability = if multiplicity == 2 {
                Stability::Tangent
            } else {
                Stability::classify(s.multiplier)
            };
            points.push(FixedPoint {
                x,
                multiplier: s.multiplier,
                stability,
                multiplicity,
                t_m: s.t_m,
                mirror_speed: s.mirror_speed,
            });
        }
        points.sort_by(|a, b| a.x.total_cmp(&b.x));
        // Roots on a shared grid node or on the seam appear twice.
        let mut deduped: Vec<FixedPoint> = Vec::with_capacity(points.len());
        for pt in points {
            match deduped.last() {
                Some(prev) if (pt.x - prev.x).abs() < 1e-9 => {}
                _ => deduped.push(pt),
            }
        }
        if deduped.len() > 1 {
            let first = deduped[0];
            let last = deduped[deduped.len() - 1];
            if (first.x + c - last.x).abs() < 1e-9 {
                deduped.pop();
            }
        }
        Ok(FixedPointSet {
            period,
            points: deduped,
        })
    }

    /// Stroboscopic velocity `(F(x) - x) / T_map` on a uniform grid.
    pub fn light_cones(&self, grid: usize) -> Result<Vec<(f64, f64)>> {
        let z0 = self.half_length();
        let c = self.circumference;
        (0..grid)
            .into_par_iter()
            .map(|i| {
                let x = -z0 + c * i as f64 / grid as f64;
                Ok((x, self.displacement(x)? / self.t_map))
            })
            .collect()
    }
}

/// One row of a fixed-point scan over the mean cavity length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub length: f64,
    pub fixed_points: FixedPointSet,
}

/// Fixed-point census of `z = L + A sin(Ωt + φ)` for each `L`, over
/// `periods` drive periods.
pub fn scan_lengths(
    lengths: &[f64],
    amplitude: f64,
    omega: f64,
    phase: f64,
    periods: u32,
    samples: usize,
) -> Result<Vec<ScanRow>> {
    lengths
        .par_iter()
        .map(|&length| {
            let p = DriveProtocol::make_harmonic(length, amplitude, omega, phase)?;
            let map = CircleMap::tabulate(&p, 0.0, periods, samples)?;
            Ok(ScanRow {
                length,
                fixed_points: map.find_fixed_points(periods)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn harmonic(l: f64) -> DriveProtocol {
        DriveProtocol::make_harmonic(l, 0.1, PI, 0.0).unwrap()
    }

    #[test]
    fn origin_is_fixed() {
        let (x1, m, t_m) = map_once(&harmonic(1.0), 0.0, 0.0).unwrap();
        assert!(x1.abs() < 1e-12);
        let expected = (1.0 - 0.1 * PI) / (1.0 + 0.1 * PI);
        assert!((m - expected).abs() < 1e-12);
        assert!((t_m.unwrap() - 1.0).abs() < 1e-12);
        let h = 1e-6;
        let fd = (map_span(&harmonic(1.0), 0.0, 2.0, h).unwrap().lift
            - map_span(&harmonic(1.0), 0.0, 2.0, -h).unwrap().lift)
            / (2.0 * h);
        assert!((fd - expected).abs() < 1e-8);
    }

    #[test]
    fn static_map_is_a_shift() {
        let p = DriveProtocol::make_harmonic(0.9, 0.0, PI, 0.0).unwrap();
        for x in [-0.9, -0.3, 0.0, 0.5, 0.85] {
            let (x1, m, _) = map_once(&p, 0.0, x).unwrap();
            let expected = wrap_ring(x + 0.2, 0.9).0;
            assert!((x1 - expected).abs() < 1e-12, "{x}: {x1} vs {expected}");
            assert_eq!(m, 1.0);
            let (back, _) = inverse(&p, 0.0, x1).unwrap();
            assert!((back - x).abs() < 1e-12);
        }
        let resonant = DriveProtocol::make_harmonic(1.0, 0.0, PI, 0.0).unwrap();
        let (x1, _, _) = map_once(&resonant, 0.0, 0.37).unwrap();
        assert!((x1 - 0.37).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip_and_multiplier() {
        let p = harmonic(1.0);
        let (x1, m, _) = map_once(&p, 0.0, 0.3).unwrap();
        let (x0, mg) = inverse(&p, 0.0, x1).unwrap();
        assert!((x0 - 0.3).abs() < 1e-12);
        assert!((m * mg - 1.0).abs() < 1e-12);
        let (y, mg0) = inverse(&p, 0.0, 0.0).unwrap();
        assert!(y.abs() < 1e-12);
        assert!(mg0 > 1.0);
    }

    #[test]
    fn composition_matches_direct_flight() {
        let p = DriveProtocol::make_harmonic(1.9, 0.12, PI, 0.4).unwrap();
        for i in 0..16 {
            let x = -1.9 + 3.8 * i as f64 / 16.0 + 0.01;
            let direct = map_periods(&p, 0.0, 3, x).unwrap();
            let steps = iterate_steps(&p, 0.0, x, 3).unwrap();
            assert!((direct.x - steps[3].0).abs() < 1e-9);
            let chain: f64 = steps.iter().map(|s| s.1).sum();
            assert!((direct.log_multiplier - chain).abs() < 1e-9);
        }
    }

    #[test]
    fn census_of_fundamental_resonance() {
        for (l, expected) in [(1.0, 2), (0.95, 2), (0.87, 0)] {
            let map = CircleMap::tabulate(&harmonic(l), 0.0, 1, 512).unwrap();
            let fps = map.find_fixed_points(1).unwrap();
            assert_eq!(fps.points.len(), expected, "L = {l}: {fps:?}");
            if expected == 2 {
                assert_eq!(fps.count(Stability::Stable), 1);
                assert_eq!(fps.count(Stability::Unstable), 1);
            }
        }
    }

    #[test]
    fn tangent_pair() {
        let map = CircleMap::tabulate(&harmonic(0.9), 0.0, 1, 512).unwrap();
        let fps = map.find_fixed_points(1).unwrap();
        assert_eq!(fps.points.len(), 1, "{fps:?}");
        assert_eq!(fps.points[0].multiplicity, 2);
        assert!((fps.points[0].multiplier - 1.0).abs() < 1e-3);
    }

    #[test]
    fn light_cone_static() {
        let p = DriveProtocol::make_harmonic(0.8, 0.0, PI, 0.0).unwrap();
        let map = CircleMap::tabulate(&p, 0.0, 1, 64).unwrap();
        for (_, v) in map.light_cones(10).unwrap() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_ring_edges() {
        assert_eq!(wrap_ring(1.0, 1.0), (-1.0, 1.0));
        assert_eq!(wrap_ring(-1.0, 1.0), (-1.0, 0.0));
        assert_eq!(wrap_ring(2.5, 1.0).0, 0.5);
    }
}
