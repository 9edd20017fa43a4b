//! Dormand–Prince 5(4) with adaptive steps, usable in either direction,
//! and a cubic Hermite dense output built from the node slopes.

/// Step-size control and safety limits.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|.
    pub max_step: f64,
    /// Initial |h|; `None` picks 1% of the span.
    pub first_step: Option<f64>,
    pub max_steps: usize,
    /// Blow-up ceiling on |y|.
    pub ceiling: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY, first_step: None, max_steps: 2_000_000, ceiling: 1e150 }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

/// Gridded solution with Hermite interpolation between nodes.
#[derive(Clone, Debug)]
pub struct OdeSolution<const N: usize = 1> {
    pub grid: Vec<f64>,
    pub values: Vec<[f64; N]>,
    pub slopes: Vec<[f64; N]>,
}

/// Why an integration stopped early, with the nodes computed so far.
#[derive(Clone, Debug)]
pub struct OdeFailure<const N: usize = 1> {
    pub reason: String,
    pub partial: OdeSolution<N>,
}

impl<const N: usize> std::fmt::Display for OdeFailure<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let last = self.partial.grid.last().copied().unwrap_or(f64::NAN);
        write!(f, "{} (last valid node at {last})", self.reason)
    }
}

impl<const N: usize> OdeSolution<N> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn increasing(&self) -> bool {
        self.grid.len() < 2 || self.grid[1] > self.grid[0]
    }

    /// Index `i` of the cell `[grid[i], grid[i+1]]` containing `z` (clamped).
    pub fn cell(&self, z: f64) -> usize {
        let n = self.grid.len();
        if n < 2 {
            return 0;
        }
        let inc = self.increasing();
        let idx = self.grid.partition_point(|&g| if inc { g <= z } else { g >= z });
        idx.clamp(1, n - 1) - 1
    }

    /// Hermite value and derivative at `z` (extrapolates from the end cells).
    pub fn eval_with_slope(&self, z: f64) -> ([f64; N], [f64; N]) {
        if self.grid.len() == 1 {
            return (self.values[0], self.slopes[0]);
        }
        let i = self.cell(z);
        let (z0, z1) = (self.grid[i], self.grid[i + 1]);
        let h = z1 - z0;
        let t = (z - z0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let (y0, y1, f0, f1) = (&self.values[i], &self.values[i + 1], &self.slopes[i], &self.slopes[i + 1]);
        let mut v = [0.0; N];
        let mut d = [0.0; N];
        for k in 0..N {
            v[k] = h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k];
            d[k] = d00 * y0[k] + d10 * f0[k] + d01 * y1[k] + d11 * f1[k];
        }
        (v, d)
    }

    pub fn eval(&self, z: f64) -> [f64; N] {
        self.eval_with_slope(z).0
    }

    /// Exact integral of the Hermite interpolant over cell `i`.
    pub fn cell_integral(&self, i: usize) -> [f64; N] {
        let h = self.grid[i + 1] - self.grid[i];
        let mut out = [0.0; N];
        for (k, o) in out.iter_mut().enumerate() {
            *o = 0.5 * h * (self.values[i][k] + self.values[i + 1][k]) + h * h / 12.0 * (self.slopes[i][k] - self.slopes[i + 1][k]);
        }
        out
    }

    /// Integral of the interpolant from `grid[i]` to `z` inside cell `i`.
    pub fn partial_cell_integral(&self, i: usize, z: f64) -> [f64; N] {
        let h = self.grid[i + 1] - self.grid[i];
        let t = (z - self.grid[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        // antiderivatives of the Hermite basis on [0, t]
        let a00 = 0.5 * t4 - t3 + t;
        let a10 = 0.25 * t4 - 2.0 / 3.0 * t3 + 0.5 * t2;
        let a01 = -0.5 * t4 + t3;
        let a11 = 0.25 * t4 - t3 / 3.0;
        let mut out = [0.0; N];
        for (k, o) in out.iter_mut().enumerate() {
            *o = h * (a00 * self.values[i][k] + a10 * h * self.slopes[i][k] + a01 * self.values[i + 1][k] + a11 * h * self.slopes[i + 1][k]);
        }
        out
    }
}

impl OdeSolution<1> {
    pub fn value_at(&self, z: f64) -> f64 {
        self.eval(z)[0]
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate the system `y' = rhs(z, y)` from `z_start` to `z_end`.
pub fn solve_ode_system<const N: usize, F>(mut rhs: F, z_start: f64, z_end: f64, y_start: [f64; N], opts: OdeOptions) -> Result<OdeSolution<N>, OdeFailure<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut z = z_start;
    let mut y = y_start;
    let mut k1 = rhs(z, &y);
    let mut sol = OdeSolution { grid: vec![z], values: vec![y], slopes: vec![k1] };
    let span = z_end - z_start;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let fail = |reason: String, sol: OdeSolution<N>| Err(OdeFailure { reason, partial: sol });
    if !k1.iter().all(|v| v.is_finite()) {
        return fail("non-finite field at the start point".into(), sol);
    }
    let mut h = opts.first_step.unwrap_or(0.01 * span.abs()).min(opts.max_step).min(span.abs());
    let mut steps = 0usize;
    let mut last_reject = false;
    while (z_end - z) * dir > 0.0 {
        if steps >= opts.max_steps {
            return fail(format!("step budget of {} exhausted", opts.max_steps), sol);
        }
        steps += 1;
        let remaining = (z_end - z).abs();
        let mut hs = h.min(remaining);
        let final_step = hs >= remaining * (1.0 - 1e-12);
        if final_step {
            hs = remaining;
        }
        let hh = hs * dir;
        let k2 = rhs(z + C2 * hh, &axpy(&y, hh, &[(A21, &k1)]));
        let k3 = rhs(z + C3 * hh, &axpy(&y, hh, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(z + C4 * hh, &axpy(&y, hh, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(z + C5 * hh, &axpy(&y, hh, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = rhs(z + hh, &axpy(&y, hh, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, hh, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let z_new = if final_step { z_end } else { z + hh };
        let k7 = rhs(z_new, &y_new);
        let mut err2 = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = hh * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / sc;
            err2 += r * r;
            finite &= y_new[i].is_finite() && k7[i].is_finite();
        }
        let err = (err2 / N as f64).sqrt();
        if !finite || !err.is_finite() {
            h = hs * 0.25;
            last_reject = true;
            if h < 1e-14 * z.abs().max(1.0) {
                return fail("non-finite state and step size underflow".into(), sol);
            }
            continue;
        }
        if err <= 1.0 {
            z = z_new;
            y = y_new;
            k1 = k7;
            sol.grid.push(z);
            sol.values.push(y);
            sol.slopes.push(k1);
            if y.iter().any(|v| v.abs() > opts.ceiling) {
                return fail(format!("blow-up: |y| exceeded {:e}", opts.ceiling), sol);
            }
            let mut factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if last_reject {
                factor = factor.min(1.0);
            }
            h = (hs * factor).min(opts.max_step);
            last_reject = false;
        } else {
            h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            last_reject = true;
            if h < 1e-14 * z.abs().max(1.0) {
                return fail("step size underflow".into(), sol);
            }
        }
    }
    Ok(sol)
}

/// Scalar convenience wrapper around [`solve_ode_system`].
pub fn solve_ode<F>(mut rhs: F, z_start: f64, z_end: f64, y_start: f64, tol: f64) -> Result<OdeSolution<1>, OdeFailure<1>>
where
    F: FnMut(f64, f64) -> f64,
{
    solve_ode_system(|z, y: &[f64; 1]| [rhs(z, y[0])], z_start, z_end, [y_start], OdeOptions::with_tol(tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth() {
        let s = solve_ode(|_, y| y, 0.0, 1.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(*s.grid.last().unwrap(), 1.0);
        assert_relative_eq!(s.values.last().unwrap()[0], std::f64::consts::E, max_relative = 1e-8);
    }

    #[test]
    fn constant_field() {
        let s = solve_ode(|_, _| 0.0, 0.0, 3.0, 1.7, 1e-10).unwrap();
        assert!(s.values.iter().all(|v| v[0] == 1.7));
    }

    #[test]
    fn backward_separable_riccati() {
        // y' = y^2 has solutions y(z) = 1/(C - z); y(1) = -1/2 fixes C = -1.
        let s = solve_ode(|_, y| y * y, 1.0, 0.0, -0.5, 1e-11).unwrap();
        assert!(s.grid.windows(2).all(|w| w[1] < w[0]));
        assert_relative_eq!(s.values.last().unwrap()[0], -1.0, max_relative = 1e-9);
        assert_relative_eq!(s.value_at(0.5), -2.0 / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn blow_up_is_detected() {
        let mut o = OdeOptions::with_tol(1e-8);
        o.ceiling = 1e6;
        let r = solve_ode_system(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, 2.0, [1.0], o);
        let f = r.unwrap_err();
        assert!(f.reason.contains("blow-up"));
        assert!(*f.partial.grid.last().unwrap() < 1.0);
    }

    #[test]
    fn hermite_reproduces_nodes_and_integrates_cubics() {
        let s = solve_ode(|z, _| 3.0 * z * z, 0.0, 2.0, 0.0, 1e-12).unwrap();
        for (z, v) in s.grid.iter().zip(&s.values) {
            assert_eq!(s.value_at(*z), v[0]);
        }
        let total: f64 = (0..s.len() - 1).map(|i| s.cell_integral(i)[0]).sum();
        assert_relative_eq!(total, 4.0, max_relative = 1e-10);
        let i = s.cell(1.3);
        let upto: f64 = (0..i).map(|j| s.cell_integral(j)[0]).sum::<f64>() + s.partial_cell_integral(i, 1.3)[0];
        assert_relative_eq!(upto, 1.3f64.powi(4) / 4.0, max_relative = 1e-10);
    }

    #[test]
    fn order_of_accuracy() {
        let err = |tol: f64| {
            let s = solve_ode(|_, y| y, 0.0, 1.0, 1.0, tol).unwrap();
            (s.values.last().unwrap()[0] - std::f64::consts::E).abs()
        };
        let (e1, e2) = (err(1e-6), err(1e-9));
        assert!(e2 < e1 / 50.0, "{e1} {e2}");
    }
}
