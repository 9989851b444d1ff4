//! Composite Gauss-Legendre quadrature over piecewise-smooth integrands.

use std::sync::OnceLock;

use rayon::prelude::*;

/// Points per panel.
pub(crate) const ORDER: usize = 8;

/// Nodes and weights on `[-1, 1]`, computed once by Newton iteration on the
/// Legendre polynomial.
#[allow(clippy::needless_range_loop)]
fn rule() -> &'static [(f64, f64); ORDER] {
    static RULE: OnceLock<[(f64, f64); ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut out = [(0.0, 0.0); ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// Quadrature nodes (with weights) covering each interval `[b_k, b_{k+1}]`
/// with `panels_per_unit * width` panels (at least one).
pub(crate) fn nodes(breaks: &[f64], total_panels: usize) -> Vec<(f64, f64)> {
    let span = breaks[breaks.len() - 1] - breaks[0];
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let panels = ((total_panels as f64) * (b - a) / span).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let lo = a + k as f64 * h;
            for &(xi, wi) in rule() {
                out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
            }
        }
    }
    out
}

/// Integrates a fallible `f` over the breakpoints in parallel.
pub(crate) fn integrate<F, E>(f: F, breaks: &[f64], total_panels: usize) -> Result<f64, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: Send,
{
    let pts = nodes(breaks, total_panels);
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|&(x, w)| f(x).map(|v| v * w))
        .collect::<Result<_, E>>()?;
    Ok(vals.iter().sum())
}
