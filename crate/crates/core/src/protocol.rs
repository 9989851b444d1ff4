//! Mirror trajectories `z(t)`: harmonic drives, constants, concatenations and
//! the discrete time-reversal splice.
//!
//! Units are fixed to `c = 1`. Every segment law is evaluated in global time,
//! so a law copied from one protocol into another keeps its phase.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};

/// Samples per natural period used by [`DriveProtocol::validate`].
pub const VALIDATION_SAMPLES_PER_PERIOD: usize = 10_000;

/// Relative tolerance of the time-reversal splice, `|2qL0 - 2z(t*)| <= tol * L0`.
pub const SPLICE_TOLERANCE: f64 = 1e-9;

/// Junction mismatches above this (relative to the local length) fail validation.
pub const JUNCTION_TOLERANCE: f64 = 1e-9;

/// The functional form of one protocol segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentLaw {
    /// `z = mean + amplitude * sin(omega * t + phase)`.
    Harmonic {
        mean: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `z = length`.
    Constant { length: f64 },
    /// `z = 2 * pivot - base(t)`.
    Reflected { base: Box<SegmentLaw>, pivot: f64 },
}

impl SegmentLaw {
    pub fn harmonic(mean: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        SegmentLaw::Harmonic {
            mean,
            amplitude,
            omega,
            phase,
        }
    }

    pub fn constant(length: f64) -> Self {
        SegmentLaw::Constant { length }
    }

    /// Position and velocity at global time `t`.
    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (base, osc, v) = self.eval_parts(t);
        (base + osc, v)
    }

    /// `z = base + osc` split into its constant and oscillating parts, plus
    /// the velocity. Lets callers cancel the large constant exactly.
    #[inline]
    pub fn eval_parts(&self, t: f64) -> (f64, f64, f64) {
        match self {
            SegmentLaw::Harmonic {
                mean,
                amplitude,
                omega,
                phase,
            } => {
                let (s, c) = (omega * t + phase).sin_cos();
                (*mean, amplitude * s, amplitude * omega * c)
            }
            SegmentLaw::Constant { length } => (*length, 0.0, 0.0),
            SegmentLaw::Reflected { base, pivot } => {
                let (b, o, v) = base.eval_parts(t);
                (2.0 * pivot - b, -o, -v)
            }
        }
    }

    /// Exact period of the law, if it has one. Constants have none.
    pub fn period(&self) -> Option<f64> {
        match self {
            SegmentLaw::Harmonic { omega, .. } => Some(TAU / omega),
            SegmentLaw::Constant { .. } => None,
            SegmentLaw::Reflected { base, .. } => base.period(),
        }
    }

    /// Period used to define the resonant length `L0 = T/2`: the drive period
    /// for harmonic laws, the round trip `2L` for a constant cavity.
    pub fn natural_period(&self) -> f64 {
        match self {
            SegmentLaw::Harmonic { omega, .. } => TAU / omega,
            SegmentLaw::Constant { length } => 2.0 * length,
            SegmentLaw::Reflected { base, .. } => base.natural_period(),
        }
    }

    /// `2 * pivot - self`; reflecting twice about the same pivot returns the
    /// original law.
    pub fn reflect(&self, pivot: f64) -> SegmentLaw {
        match self {
            SegmentLaw::Reflected { base, pivot: p } if *p == pivot => (**base).clone(),
            other => SegmentLaw::Reflected {
                base: Box::new(other.clone()),
                pivot,
            },
        }
    }

    /// The law `t -> self(t + dt)`.
    pub fn shifted(&self, dt: f64) -> SegmentLaw {
        match self {
            SegmentLaw::Harmonic {
                mean,
                amplitude,
                omega,
                phase,
            } => SegmentLaw::Harmonic {
                mean: *mean,
                amplitude: *amplitude,
                omega: *omega,
                phase: advance_phase(*phase, *omega, dt),
            },
            SegmentLaw::Constant { .. } => self.clone(),
            SegmentLaw::Reflected { base, pivot } => SegmentLaw::Reflected {
                base: Box::new(base.shifted(dt)),
                pivot: *pivot,
            },
        }
    }

    /// The law `s -> self(pivot_time - s)`.
    pub fn time_mirrored(&self, pivot_time: f64) -> SegmentLaw {
        match self {
            SegmentLaw::Harmonic {
                mean,
                amplitude,
                omega,
                phase,
            } => SegmentLaw::Harmonic {
                mean: *mean,
                amplitude: *amplitude,
                omega: *omega,
                phase: (PI - omega * pivot_time - phase).rem_euclid(TAU),
            },
            SegmentLaw::Constant { .. } => self.clone(),
            SegmentLaw::Reflected { base, pivot } => SegmentLaw::Reflected {
                base: Box::new(base.time_mirrored(pivot_time)),
                pivot: *pivot,
            },
        }
    }

    /// Folds reflections of harmonic and constant laws back into those forms:
    /// `2p - (L + A sin(x)) = (2p - L) + A sin(x + pi)`.
    pub fn canonical(&self) -> SegmentLaw {
        match self {
            SegmentLaw::Reflected { base, pivot } => match base.canonical() {
                SegmentLaw::Harmonic {
                    mean,
                    amplitude,
                    omega,
                    phase,
                } => SegmentLaw::Harmonic {
                    mean: 2.0 * pivot - mean,
                    amplitude,
                    omega,
                    phase: (phase + PI).rem_euclid(TAU),
                },
                SegmentLaw::Constant { length } => SegmentLaw::Constant {
                    length: 2.0 * pivot - length,
                },
                refl => SegmentLaw::Reflected {
                    base: Box::new(refl),
                    pivot: *pivot,
                },
            },
            other => other.clone(),
        }
    }

    fn check_parameters(&self) -> Result<()> {
        match self {
            SegmentLaw::Harmonic {
                mean,
                amplitude,
                omega,
                phase,
            } => {
                if ![*mean, *amplitude, *omega, *phase].iter().all(|v| v.is_finite()) {
                    return Err(CavityError::InvalidProtocol(
                        "harmonic parameters must be finite".into(),
                    ));
                }
                if *amplitude < 0.0 {
                    return Err(CavityError::InvalidProtocol(format!(
                        "amplitude must be non-negative, got {amplitude}"
                    )));
                }
                if *omega <= 0.0 {
                    return Err(CavityError::InvalidProtocol(format!(
                        "angular frequency must be positive, got {omega}"
                    )));
                }
                if mean - amplitude <= 0.0 {
                    return Err(CavityError::NonPositiveLength {
                        min_length: mean - amplitude,
                    });
                }
                if amplitude * omega >= 1.0 {
                    return Err(CavityError::Superluminal {
                        max_speed: amplitude * omega,
                    });
                }
                Ok(())
            }
            SegmentLaw::Constant { length } => {
                if !length.is_finite() || *length <= 0.0 {
                    return Err(CavityError::NonPositiveLength {
                        min_length: *length,
                    });
                }
                Ok(())
            }
            SegmentLaw::Reflected { base, pivot } => {
                if !pivot.is_finite() {
                    return Err(CavityError::InvalidProtocol("pivot must be finite".into()));
                }
                base.check_parameters()
            }
        }
    }
}

/// `(phase + omega * dt) mod 2 pi` without losing the low bits of a large
/// `omega * dt`: the product is split exactly with an FMA and the multiple of
/// 2 pi removed by a second FMA.
fn advance_phase(phase: f64, omega: f64, dt: f64) -> f64 {
    let hi = omega * dt;
    let lo = omega.mul_add(dt, -hi);
    let k = ((hi + phase) / TAU).floor();
    let r = (-k).mul_add(TAU, hi) + (lo + phase);
    r.rem_euclid(TAU)
}

/// A law active on the half-open interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub law: SegmentLaw,
}

impl Segment {
    pub fn new(start: f64, end: f64, law: SegmentLaw) -> Self {
        Segment { start, end, law }
    }

    /// A segment covering all of time.
    pub fn unbounded(law: SegmentLaw) -> Self {
        Segment::new(f64::NEG_INFINITY, f64::INFINITY, law)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Result of [`DriveProtocol::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub min_length: f64,
    pub max_speed: f64,
    /// `(junction time, |z_left - z_right|)` for every segment junction.
    pub junction_mismatches: Vec<(f64, f64)>,
    pub passed: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn max_junction_mismatch(&self) -> f64 {
        self.junction_mismatches
            .iter()
            .map(|&(_, m)| m)
            .fold(0.0, f64::max)
    }
}

/// A piecewise mirror trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProtocol {
    segments: Vec<Segment>,
    min_length: f64,
    max_speed: f64,
}

impl DriveProtocol {
    /// Builds and fully validates a protocol. Segments must be contiguous.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let protocol = Self::from_segments_unchecked(segments)?;
        let report = protocol.validate();
        if report.max_speed >= 1.0 {
            return Err(CavityError::Superluminal {
                max_speed: report.max_speed,
            });
        }
        if report.min_length <= 0.0 {
            return Err(CavityError::NonPositiveLength {
                min_length: report.min_length,
            });
        }
        if !report.passed {
            return Err(CavityError::InvalidProtocol(report.messages.join("; ")));
        }
        Ok(protocol)
    }

    /// Builds a protocol checking only structure and per-law parameters.
    /// Junction continuity is left to [`validate`](Self::validate).
    pub fn from_segments_unchecked(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(CavityError::InvalidProtocol("no segments".into()));
        }
        for seg in &segments {
            if seg.start.is_nan() || seg.end.is_nan() || seg.start >= seg.end {
                return Err(CavityError::InvalidProtocol(format!(
                    "segment [{}, {}) is empty",
                    seg.start, seg.end
                )));
            }
            seg.law.check_parameters()?;
        }
        for pair in segments.windows(2) {
            if pair[0].end != pair[1].start {
                return Err(CavityError::InvalidProtocol(format!(
                    "segments are not contiguous at t = {} / {}",
                    pair[0].end, pair[1].start
                )));
            }
        }
        let mut protocol = DriveProtocol {
            segments,
            min_length: f64::NAN,
            max_speed: f64::NAN,
        };
        let report = protocol.validate();
        protocol.min_length = report.min_length;
        protocol.max_speed = report.max_speed;
        Ok(protocol)
    }

    /// `z(t) = L + A sin(Ωt + φ)` on all of time.
    pub fn make_harmonic(mean: f64, amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        Self::new(vec![Segment::unbounded(SegmentLaw::harmonic(
            mean, amplitude, omega, phase,
        ))])
    }

    /// A static cavity of length `length`.
    pub fn constant(length: f64) -> Result<Self> {
        Self::new(vec![Segment::unbounded(SegmentLaw::constant(length))])
    }

    /// Concatenates laws starting at `start`. Each entry carries an optional
    /// duration; `None` is only allowed last and extends to `+inf`. The first
    /// law also covers all times before `start`.
    pub fn concatenate(start: f64, pieces: Vec<(SegmentLaw, Option<f64>)>) -> Result<Self> {
        let n = pieces.len();
        let mut segments = Vec::with_capacity(n);
        let mut t = start;
        for (i, (law, duration)) in pieces.into_iter().enumerate() {
            let seg_start = if i == 0 { f64::NEG_INFINITY } else { t };
            let end = match duration {
                Some(d) if d > 0.0 && d.is_finite() => t + d,
                Some(d) => {
                    return Err(CavityError::InvalidProtocol(format!(
                        "segment {i} has invalid duration {d}"
                    )))
                }
                None if i + 1 == n => f64::INFINITY,
                None => {
                    return Err(CavityError::InvalidProtocol(format!(
                        "segment {i} needs a duration (only the last may be unbounded)"
                    )))
                }
            };
            segments.push(Segment::new(seg_start, end, law));
            t = end;
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `[start, end)` of the whole protocol.
    pub fn domain(&self) -> (f64, f64) {
        (
            self.segments[0].start,
            self.segments[self.segments.len() - 1].end,
        )
    }

    /// Sampled minimum of `z` (cached at construction).
    pub fn min_length(&self) -> f64 {
        self.min_length
    }

    /// Sampled maximum of `|dz/dt|` (cached at construction).
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    fn segment_index(&self, t: f64) -> Option<usize> {
        if self.segments.len() == 1 {
            return self.segments[0].contains(t).then_some(0);
        }
        let idx = self.segments.partition_point(|s| s.end <= t);
        (idx < self.segments.len() && self.segments[idx].contains(t)).then_some(idx)
    }

    /// The segment active at `t`.
    pub fn segment_at(&self, t: f64) -> Result<&Segment> {
        self.segment_index(t)
            .map(|i| &self.segments[i])
            .ok_or_else(|| self.out_of_domain(t))
    }

    fn out_of_domain(&self, t: f64) -> CavityError {
        let (start, end) = self.domain();
        CavityError::OutOfDomain { t, start, end }
    }

    /// Exact `(z, dz/dt)` of the active segment law.
    #[inline]
    pub fn evaluate(&self, t: f64) -> Result<(f64, f64)> {
        match self.segment_index(t) {
            Some(i) => Ok(self.segments[i].law.eval(t)),
            None => Err(self.out_of_domain(t)),
        }
    }

    /// `z(t)` only; panics outside the domain. Use where the caller already
    /// checked the domain.
    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64) -> (f64, f64) {
        let i = self.segment_index(t).unwrap_or(if t < self.domain().0 {
            0
        } else {
            self.segments.len() - 1
        });
        self.segments[i].law.eval(t)
    }

    /// [`SegmentLaw::eval_parts`] of the law active at `t` (clamped).
    pub(crate) fn eval_parts_unchecked(&self, t: f64) -> (f64, f64, f64) {
        let i = self.segment_index(t).unwrap_or(if t < self.domain().0 {
            0
        } else {
            self.segments.len() - 1
        });
        self.segments[i].law.eval_parts(t)
    }

    /// Natural period of the segment active at `t`.
    pub fn period_at(&self, t: f64) -> Result<f64> {
        Ok(self.segment_at(t)?.law.natural_period())
    }

    /// Sampled diagnostics: min z, max |dz/dt|, junction mismatches.
    pub fn validate(&self) -> ValidationReport {
        let mut min_length = f64::INFINITY;
        let mut max_speed: f64 = 0.0;
        let mut messages = Vec::new();
        for seg in &self.segments {
            let period = seg.law.natural_period();
            let (a, b) = sample_window(seg, period);
            let n = ((b - a) / period * VALIDATION_SAMPLES_PER_PERIOD as f64)
                .ceil()
                .clamp(100.0, 1e7) as usize;
            for k in 0..=n {
                let t = a + (b - a) * k as f64 / n as f64;
                let (z, v) = seg.law.eval(t);
                min_length = min_length.min(z);
                max_speed = max_speed.max(v.abs());
            }
        }
        let mut junction_mismatches = Vec::new();
        let mut junction_ok = true;
        for pair in self.segments.windows(2) {
            let t = pair[0].end;
            let (zl, _) = pair[0].law.eval(t);
            let (zr, _) = pair[1].law.eval(t);
            let mismatch = (zl - zr).abs();
            if mismatch > JUNCTION_TOLERANCE * zl.abs().max(zr.abs()).max(1.0) {
                junction_ok = false;
                messages.push(format!("discontinuity {mismatch:e} at t = {t}"));
            }
            junction_mismatches.push((t, mismatch));
        }
        if max_speed >= 1.0 {
            messages.push(format!("superluminal: max |dz/dt| = {max_speed}"));
        }
        if min_length <= 0.0 {
            messages.push(format!("non-positive length: min z = {min_length}"));
        }
        ValidationReport {
            min_length,
            max_speed,
            junction_mismatches,
            passed: junction_ok && max_speed < 1.0 && min_length > 0.0,
            messages,
        }
    }

    /// Discrete time reversal about `t_star` for the `q`-th resonance: the
    /// protocol is unchanged before `t_star` and `2qL0 - z(t)` afterwards,
    /// with `L0` half the natural period of the law active at `t_star`.
    pub fn time_reverse(&self, t_star: f64, q: u32) -> Result<Self> {
        let (pivot, z_star, l0) = self.splice_pivot(t_star, q)?;
        let mismatch = (2.0 * pivot - 2.0 * z_star).abs();
        if mismatch > SPLICE_TOLERANCE * l0 {
            return Err(CavityError::SpliceDiscontinuity { t_star, mismatch });
        }
        self.splice_reflected(t_star, pivot)
    }

    /// Same splice as [`time_reverse`](Self::time_reverse) without the
    /// continuity precondition. The result may fail validation.
    pub fn time_reverse_unchecked(&self, t_star: f64, q: u32) -> Result<Self> {
        let (pivot, _, _) = self.splice_pivot(t_star, q)?;
        self.splice_reflected(t_star, pivot)
    }

    fn splice_pivot(&self, t_star: f64, q: u32) -> Result<(f64, f64, f64)> {
        if q == 0 {
            return Err(CavityError::InvalidParameters("q must be positive".into()));
        }
        let seg = self.segment_at(t_star)?;
        let l0 = seg.law.natural_period() / 2.0;
        let (z_star, _) = seg.law.eval(t_star);
        Ok((q as f64 * l0, z_star, l0))
    }

    fn splice_reflected(&self, t_star: f64, pivot: f64) -> Result<Self> {
        let mut segments = Vec::with_capacity(self.segments.len() + 1);
        for seg in &self.segments {
            if seg.end <= t_star {
                segments.push(seg.clone());
            } else if seg.start >= t_star {
                segments.push(Segment::new(seg.start, seg.end, seg.law.reflect(pivot)));
            } else {
                segments.push(Segment::new(seg.start, t_star, seg.law.clone()));
                segments.push(Segment::new(t_star, seg.end, seg.law.reflect(pivot)));
            }
        }
        // Re-splicing an already reversed protocol at the same time leaves
        // two adjacent segments with identical laws; merge them.
        let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
        for seg in segments {
            match merged.last_mut() {
                Some(prev) if prev.law == seg.law && prev.end == seg.start => prev.end = seg.end,
                _ => merged.push(seg),
            }
        }
        Self::from_segments_unchecked(merged)
    }

    /// The protocol `s -> z(pivot_time - s)`, used to run rays backwards as
    /// forward rays of a mirrored problem.
    pub fn time_mirrored(&self, pivot_time: f64) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|seg| {
                Segment::new(
                    pivot_time - seg.end,
                    pivot_time - seg.start,
                    seg.law.time_mirrored(pivot_time),
                )
            })
            .collect();
        Self::from_segments_unchecked(segments)
    }

    /// The law active at `t_ref`, shifted so that local time 0 corresponds to
    /// `t_ref` and extended to all of time. Keeps absolute times small when
    /// iterating a periodic segment far from the origin.
    pub fn window_at(&self, t_ref: f64) -> Result<Self> {
        let law = self.segment_at(t_ref)?.law.shifted(t_ref);
        // The window is a piece of this protocol, so its bounds are covered
        // by ours; skipping the sampled validation keeps this cheap enough
        // to call once per map step.
        Ok(DriveProtocol {
            segments: vec![Segment::unbounded(law)],
            min_length: self.min_length,
            max_speed: self.max_speed,
        })
    }
}

/// Sampling window for validation: the whole segment when bounded, one
/// natural period otherwise.
fn sample_window(seg: &Segment, period: f64) -> (f64, f64) {
    match (seg.start.is_finite(), seg.end.is_finite()) {
        (true, true) => (seg.start, seg.end),
        (true, false) => (seg.start, seg.start + period),
        (false, true) => (seg.end - period, seg.end),
        (false, false) => (0.0, period),
    }
}
