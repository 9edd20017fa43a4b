use crate::error::{CbreError, Result};

/// Solve `f(x) = y` for strictly increasing `f` on a bracket `[lo, hi]`
/// with `f(lo) <= y <= f(hi)`, by secant steps safeguarded with bisection.
///
/// Stops when `|f(x) - y| <= atol` or the bracket collapses to rounding level.
pub fn invert_monotone<F: FnMut(f64) -> f64>(mut f: F, y: f64, bracket: (f64, f64), atol: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if !(flo <= y && y <= fhi) || lo > hi {
        return Err(CbreError::Bracket { lo, hi, f_lo: flo, f_hi: fhi, target: y });
    }
    if (flo - y).abs() <= atol {
        return Ok(lo);
    }
    if (fhi - y).abs() <= atol {
        return Ok(hi);
    }
    let mut use_bisection = false;
    for _ in 0..400 {
        let width = hi - lo;
        let x = if use_bisection || !(fhi - flo).is_finite() || fhi == flo {
            lo + 0.5 * width
        } else {
            let s = lo + (y - flo) / (fhi - flo) * width;
            // keep secant iterates away from the bracket ends
            s.clamp(lo + 0.01 * width, hi - 0.01 * width)
        };
        let fx = f(x);
        if (fx - y).abs() <= atol {
            return Ok(x);
        }
        let before = width;
        if fx < y {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        use_bisection = hi - lo > 0.5 * before;
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            return Ok(if (flo - y).abs() <= (fhi - y).abs() { lo } else { hi });
        }
    }
    Ok(0.5 * (lo + hi))
}
