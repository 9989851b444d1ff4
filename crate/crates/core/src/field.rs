//! Classical vector potential on the ring, evolved by pullback along null
//! lines.
//!
//! The field at `(t, x)` equals the initial field at the foot of the null
//! line through `(t, x)`, times the accumulated parity. Energy density is
//! `(dA/dx)^2`; its transport uses the exact Doppler Jacobian of the null
//! line, so only the initial profile is ever differentiated numerically.
//!
//! The initial field may jump at `x = 0` and at the seam `x = -z`; both are
//! treated as breaks by interpolation and differentiation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::floquet::{drive_period, inverse_span, map_span};
use crate::protocol::DriveProtocol;
use crate::quad;

pub const MIN_POINTS: usize = 16;
pub const DEFAULT_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    #[default]
    MonotoneCubic,
}

/// Closed-form initial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldProfile {
    /// `A0 = slope * x`: uniform energy density, with a jump at the seam.
    Uniform { slope: f64 },
    /// `A0 = amplitude * sin(mode * pi * x / z)`, smooth on the ring.
    Sine { mode: u32, amplitude: f64 },
    /// Smooth compact bump `amplitude * exp(1 - 1 / (1 - s^2))`, `s` the
    /// ring distance to `center` over `width`.
    Bump { center: f64, width: f64, amplitude: f64 },
    Gaussian { center: f64, width: f64, amplitude: f64 },
}

impl FieldProfile {
    /// Value on the ring of half-length `z`.
    pub fn eval(&self, x: f64, z: f64) -> f64 {
        let ring_distance = |c: f64| {
            let d = (x - c).rem_euclid(2.0 * z);
            if d > z {
                d - 2.0 * z
            } else {
                d
            }
        };
        match *self {
            FieldProfile::Uniform { slope } => slope * x,
            FieldProfile::Sine { mode, amplitude } => {
                amplitude * (mode as f64 * std::f64::consts::PI * x / z).sin()
            }
            FieldProfile::Bump {
                center,
                width,
                amplitude,
            } => {
                let s = ring_distance(center) / width;
                if s.abs() < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
            FieldProfile::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let d = ring_distance(center);
                amplitude * (-0.5 * d * d / (width * width)).exp()
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            FieldProfile::Uniform { slope } => slope.is_finite(),
            FieldProfile::Sine { mode, amplitude } => mode > 0 && amplitude.is_finite(),
            FieldProfile::Bump {
                center,
                width,
                amplitude,
            }
            | FieldProfile::Gaussian {
                center,
                width,
                amplitude,
            } => center.is_finite() && width > 0.0 && amplitude.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(CavityError::InvalidField(format!("invalid profile {self:?}")))
        }
    }
}

/// Interpolant on one side of the `x = 0` break.
#[derive(Debug, Clone, PartialEq)]
struct Piece {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Hermite slopes (Fritsch-Carlson) for the cubic mode.
    hermite: Vec<f64>,
    /// Fourth-order finite-difference derivative at the nodes.
    deriv: Vec<f64>,
}

impl Piece {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let deriv = node_derivatives(&xs, &ys);
        let hermite = pchip_slopes(&xs, &ys);
        Piece {
            xs,
            ys,
            hermite,
            deriv,
        }
    }

    fn eval(&self, x: f64, interp: Interpolation, derivative: bool) -> f64 {
        let n = self.xs.len();
        if derivative {
            return match interp {
                Interpolation::Linear => linear(&self.xs, &self.deriv, x),
                // The derivative need not be monotone; a local cubic keeps
                // fourth-order accuracy right up to the breaks.
                Interpolation::MonotoneCubic => lagrange4(&self.xs, &self.deriv, x),
            };
        }
        let ys = &self.ys;
        if x <= self.xs[0] {
            return ys[0] + self.deriv[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return ys[n - 1] + self.deriv[n - 1] * (x - self.xs[n - 1]);
        }
        match interp {
            Interpolation::Linear => linear(&self.xs, ys, x),
            Interpolation::MonotoneCubic => {
                let i = interval(&self.xs, x);
                let (x0, x1) = (self.xs[i], self.xs[i + 1]);
                let h = x1 - x0;
                let s = (x - x0) / h;
                let (s2, s3) = (s * s, s * s * s);
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                let m = &self.hermite;
                h00 * ys[i] + h10 * h * m[i] + h01 * ys[i + 1] + h11 * h * m[i + 1]
            }
        }
    }
}

/// Index of the interval containing `x`, clamped to the grid.
fn interval(xs: &[f64], x: f64) -> usize {
    xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1) - 1
}

/// Piecewise-linear interpolation, extrapolating the end segments.
fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = interval(xs, x);
    let s = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + s * (ys[i + 1] - ys[i])
}

/// Cubic through the four nodes around `x` (shifted at the ends).
fn lagrange4(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n < 4 {
        return linear(xs, ys, x);
    }
    let lo = interval(xs, x).saturating_sub(1).min(n - 4);
    let mut sum = 0.0;
    for j in lo..lo + 4 {
        let mut w = 1.0;
        for k in lo..lo + 4 {
            if k != j {
                w *= (x - xs[k]) / (xs[j] - xs[k]);
            }
        }
        sum += w * ys[j];
    }
    sum
}

/// Finite-difference weights for the first derivative at `x0` over `nodes`
/// (Fornberg's recursion).
fn fd_weights(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    // c[j][k]: weight of node j for derivative order k (k = 0, 1).
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                let prev = c[i - 1];
                c[i][1] = c1 * (prev[0] - (nodes[i - 1] - x0) * prev[1]) / c2;
                c[i][0] = -c1 * (nodes[i - 1] - x0) * prev[0] / c2;
            }
            let cj = c[j];
            c[j][1] = ((nodes[i] - x0) * cj[1] - cj[0]) / c3;
            c[j][0] = (nodes[i] - x0) * cj[0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Fourth-order derivative estimates from five-point stencils kept inside
/// the piece (shifted one-sided at the ends).
fn node_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let width = n.min(5);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(width / 2).min(n - width);
            let nodes = &xs[lo..lo + width];
            fd_weights(xs[i], nodes)
                .iter()
                .zip(&ys[lo..lo + width])
                .map(|(w, y)| w * y)
                .sum()
        })
        .collect()
}

/// Fritsch-Carlson monotone cubic slopes.
fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

/// Sampled field on the ring `[-z, z)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    /// `z(t)`.
    pub half_length: f64,
    pub interpolation: Interpolation,
    grid: Vec<f64>,
    values: Vec<f64>,
    negative: Piece,
    positive: Piece,
}

impl FieldState {
    /// Validates and wraps raw samples.
    pub fn from_samples(
        t: f64,
        half_length: f64,
        grid: Vec<f64>,
        values: Vec<f64>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(CavityError::InvalidField(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < MIN_POINTS {
            return Err(CavityError::InvalidField(format!(
                "need at least {MIN_POINTS} points, got {}",
                grid.len()
            )));
        }
        if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(CavityError::InvalidField(format!(
                "grid is not strictly increasing at x = {}",
                w[1]
            )));
        }
        if grid[0] < -half_length || grid[grid.len() - 1] >= half_length {
            return Err(CavityError::InvalidField(format!(
                "grid leaves the ring [-{half_length}, {half_length})"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CavityError::InvalidField("non-finite field value".into()));
        }
        let split = grid.partition_point(|&x| x < 0.0);
        if split < 3 || grid.len() - split < 3 {
            return Err(CavityError::InvalidField(
                "each half of the ring needs at least 3 grid points".into(),
            ));
        }
        let negative = Piece::new(grid[..split].to_vec(), values[..split].to_vec());
        let positive = Piece::new(grid[split..].to_vec(), values[split..].to_vec());
        Ok(FieldState {
            t,
            half_length,
            interpolation,
            grid,
            values,
            negative,
            positive,
        })
    }

    /// Samples `profile` on a uniform `n`-point grid at `t0`.
    pub fn init(
        p: &DriveProtocol,
        t0: f64,
        n: usize,
        profile: &FieldProfile,
        interpolation: Interpolation,
    ) -> Result<Self> {
        profile.check()?;
        let (z, _) = p.evaluate(t0)?;
        let grid = uniform_grid(z, n);
        let values = grid.iter().map(|&x| profile.eval(x, z)).collect();
        Self::from_samples(t0, z, grid, values, interpolation)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn piece(&self, x: f64) -> &Piece {
        if x < 0.0 {
            &self.negative
        } else {
            &self.positive
        }
    }

    /// Interpolated field value.
    pub fn value(&self, x: f64) -> f64 {
        self.piece(x).eval(x, self.interpolation, false)
    }

    /// Interpolated `dA/dx`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.piece(x).eval(x, self.interpolation, true)
    }
}

/// `init_field` with a closed-form profile.
pub fn init_field(
    p: &DriveProtocol,
    t0: f64,
    n: usize,
    profile: &FieldProfile,
    interpolation: Interpolation,
) -> Result<FieldState> {
    FieldState::init(p, t0, n, profile, interpolation)
}

/// Uniform `n`-point grid on `[-z, z)`.
pub fn uniform_grid(z: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -z + 2.0 * z * i as f64 / n as f64).collect()
}

/// A null line followed between two times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    /// Ring coordinate at the other end.
    pub x: f64,
    pub parity: i8,
    /// Log of `d x_other / d x`.
    pub log_jacobian: f64,
}

/// Chunk boundaries of one drive period each from `t_from` to `t_to`.
fn chunks(p: &DriveProtocol, t_from: f64, t_to: f64) -> Result<Vec<f64>> {
    let mut b = vec![t_from];
    let mut cur = t_from;
    loop {
        let next = cur + drive_period(p, cur)?;
        // Close enough to the end: snap, avoiding a sliver chunk.
        if next >= t_to - 1e-12 * t_to.abs().max(1.0) {
            b.push(t_to);
            return Ok(b);
        }
        b.push(next);
        cur = next;
    }
}

/// Follows the null line through `(t, x)` back to `t_from`.
pub fn pullback(p: &DriveProtocol, t_from: f64, t: f64, x: f64) -> Result<Transport> {
    if t < t_from {
        return Err(CavityError::InvalidParameters(format!(
            "pullback target {t_from} is after {t}"
        )));
    }
    let mut out = Transport {
        x,
        parity: 1,
        log_jacobian: 0.0,
    };
    if t == t_from {
        return Ok(out);
    }
    let b = chunks(p, t_from, t)?;
    for w in b.windows(2).rev() {
        let s = inverse_span(p, w[0], w[1] - w[0], out.x)?;
        out.x = s.x;
        out.parity *= s.parity;
        out.log_jacobian += s.log_multiplier;
    }
    Ok(out)
}

/// Follows the null line through `(t_from, x0)` forward to `t`.
pub fn pushforward(p: &DriveProtocol, t_from: f64, t: f64, x0: f64) -> Result<Transport> {
    if t < t_from {
        return Err(CavityError::InvalidParameters(format!(
            "pushforward target {t} is before {t_from}"
        )));
    }
    let mut out = Transport {
        x: x0,
        parity: 1,
        log_jacobian: 0.0,
    };
    if t == t_from {
        return Ok(out);
    }
    let b = chunks(p, t_from, t)?;
    for w in b.windows(2) {
        let s = map_span(p, w[0], w[1] - w[0], out.x)?;
        out.x = s.x;
        out.parity *= s.parity;
        out.log_jacobian += s.log_multiplier;
    }
    Ok(out)
}

/// The field at time `t` on a uniform grid with as many points as `f0`.
pub fn evolve(p: &DriveProtocol, f0: &FieldState, t: f64) -> Result<FieldState> {
    let (z, _) = p.evaluate(t)?;
    let grid = uniform_grid(z, f0.len());
    let values = grid
        .par_iter()
        .map(|&x| {
            let tr = pullback(p, f0.t, t, x)?;
            Ok(tr.parity as f64 * f0.value(tr.x))
        })
        .collect::<Result<Vec<f64>>>()?;
    FieldState::from_samples(t, z, grid, values, f0.interpolation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Trapezoidal (periodic) integral of `density` over the ring.
    pub total: f64,
}

fn density_at(p: &DriveProtocol, f0: &FieldState, t: f64, x: f64) -> Result<f64> {
    let tr = pullback(p, f0.t, t, x)?;
    let d = f0.derivative(tr.x);
    Ok((2.0 * tr.log_jacobian).exp() * d * d)
}

/// `[dg/dx]^2 [A0'(g(x))]^2` on a uniform grid, Jacobian from exact
/// multiplier products.
pub fn energy_density(p: &DriveProtocol, f0: &FieldState, t: f64) -> Result<EnergyReport> {
    let (z, _) = p.evaluate(t)?;
    let grid = uniform_grid(z, f0.len());
    let density = grid
        .par_iter()
        .map(|&x| density_at(p, f0, t, x))
        .collect::<Result<Vec<f64>>>()?;
    let dx = 2.0 * z / grid.len() as f64;
    let total = density.iter().sum::<f64>() * dx;
    Ok(EnergyReport {
        t,
        grid,
        density,
        total,
    })
}

fn sorted_breaks(z: f64, interior: &[f64]) -> Vec<f64> {
    let mut b = vec![-z, z];
    b.extend(interior.iter().copied().filter(|x| *x > -z && *x < z));
    b.sort_by(f64::total_cmp);
    b
}

/// Panels for the accurate energy integrals: about two nodes per field
/// sample.
fn panels(f0: &FieldState) -> usize {
    (2 * f0.len() / quad::ORDER).max(64)
}

/// Ring integral of the energy density at `t`, split at the images of the
/// initial breaks so each piece is smooth.
pub fn total_energy(p: &DriveProtocol, f0: &FieldState, t: f64) -> Result<f64> {
    let (z, _) = p.evaluate(t)?;
    let seam = pushforward(p, f0.t, t, -f0.half_length)?.x;
    let origin = pushforward(p, f0.t, t, 0.0)?.x;
    let breaks = sorted_breaks(z, &[seam, origin]);
    quad::integrate(|x| density_at(p, f0, t, x), &breaks, panels(f0))
}

/// The same energy integrated over initial coordinates:
/// `int A0'(x0)^2 / f'(x0) dx0`.
pub fn pushforward_energy(p: &DriveProtocol, f0: &FieldState, t: f64) -> Result<f64> {
    let (z_t, _) = p.evaluate(t)?;
    let preimage = pullback(p, f0.t, t, -z_t)?.x;
    let breaks = sorted_breaks(f0.half_length, &[0.0, preimage]);
    quad::integrate(
        |x0| {
            let tr = pushforward(p, f0.t, t, x0)?;
            let d = f0.derivative(x0);
            Ok((-tr.log_jacobian).exp() * d * d)
        },
        &breaks,
        panels(f0),
    )
}
