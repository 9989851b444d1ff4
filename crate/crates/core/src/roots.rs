//! Safeguarded scalar root finding for strictly increasing functions.

/// Absolute time tolerance used by all encounter solves.
pub const TIME_TOLERANCE: f64 = 1e-12;

/// Finds the root of a strictly increasing `f` inside `[lo, hi]`, where
/// `f(lo) <= 0 <= f(hi)`. `f` returns the value and its derivative.
///
/// Newton steps are taken while they stay inside the bracket; otherwise the
/// bracket is bisected. Iteration stops once the bracket is narrower than a
/// few ulps or the Newton update falls below `TIME_TOLERANCE * 1e-3`.
pub(crate) fn increasing_root<F>(f: F, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    debug_assert!(lo <= hi);
    let (flo, _) = f(lo);
    if flo >= 0.0 {
        return lo;
    }
    let (fhi, _) = f(hi);
    if fhi <= 0.0 {
        return hi;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return x;
        }
        let newton = if dfx > 0.0 { x - fx / dfx } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= TIME_TOLERANCE * 1e-3 {
            let (fn_, _) = f(next);
            // Pick whichever of next/x sits closer to the root.
            return if fn_.abs() < fx.abs() { next } else { x };
        }
        x = next;
    }
    x
}

/// Plain bisection on a function with `f(lo)` and `f(hi)` of opposite sign.
pub(crate) fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = increasing_root(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn endpoint_roots() {
        assert_eq!(increasing_root(|x| (x, 1.0), 0.0, 1.0), 0.0);
        assert_eq!(increasing_root(|x| (x - 1.0, 1.0), 0.0, 1.0), 1.0);
    }

    #[test]
    fn bisect_sign_change() {
        let r = bisect(|x: f64| x.cos(), 0.0, 3.0, 1e-13);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
