//! Cumulative tables of `m`, `G = e^{-m}∫_0^u e^m` and `ln I` on a fixed
//! geometric grid, with quintic Hermite interpolation inside cells.

use super::LogisticModel;
use crate::quadrature::{gauss10, integrate, integrate_log, Tolerance};

pub(super) const U_LO: f64 = 1e-12;
const DECADES: usize = 24;
const PER_DECADE: usize = 128;
const ONE_INDEX: usize = 12 * PER_DECADE;

/// Quintic Hermite interpolant from values, slopes and second derivatives.
#[allow(clippy::too_many_arguments)]
pub(super) fn hermite5(x0: f64, x1: f64, y: (f64, f64), d: (f64, f64), s: (f64, f64), x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
    h00 * y.0 + h01 * y.1 + h * (h10 * d.0 + h11 * d.1) + h * h * (h20 * s.0 + h21 * s.1)
}

/// Interpolant of a solution of `F′ = 1 - aF` (`a` the local rate) known
/// at the nodes. Quintic Hermite where the cell is mild; where `a·h > 30`
/// the derivative data cancel catastrophically, so the smooth ratio
/// `F·a ≈ 1` is interpolated in `ln u` instead and divided by `a(u)`.
pub(super) struct RelaxInterp {
    val: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    ratio: Vec<f64>,
    stiff: Vec<bool>,
}

const STIFF: f64 = 30.0;

impl RelaxInterp {
    /// From values `f`, rates `a` and rate slopes `da` at the nodes.
    pub fn new(nodes: &[f64], f: Vec<f64>, a: &[f64], da: &[f64]) -> Self {
        let n = nodes.len();
        let d1: Vec<f64> = (0..n).map(|k| 1.0 - a[k] * f[k]).collect();
        let d2 = (0..n).map(|k| -da[k] * f[k] - a[k] * d1[k]).collect();
        let ratio = (0..n).map(|k| f[k] * a[k]).collect();
        let stiff = (0..n - 1).map(|k| {
            let h = nodes[k + 1] - nodes[k];
            a[k] * h > STIFF && a[k + 1] * h > STIFF
        }).collect();
        Self { val: f, d1, d2, ratio, stiff }
    }

    /// Value in cell `k`; `rate` evaluates `a(u)` and is only called in
    /// stiff cells.
    pub fn eval(&self, nodes: &[f64], k: usize, u: f64, rate: impl FnOnce() -> f64) -> f64 {
        if !self.stiff[k] {
            return hermite5(nodes[k], nodes[k + 1], (self.val[k], self.val[k + 1]), (self.d1[k], self.d1[k + 1]), (self.d2[k], self.d2[k + 1]), u);
        }
        let n = nodes.len();
        let j0 = k.saturating_sub(1).min(n - 4);
        let t = u.ln();
        let mut r = 0.0;
        for i in j0..j0 + 4 {
            let mut w = 1.0;
            for j in j0..j0 + 4 {
                if j != i {
                    w *= (t - nodes[j].ln()) / (nodes[i].ln() - nodes[j].ln());
                }
            }
            r += w * self.ratio[i];
        }
        r / rate()
    }
}

pub(super) struct MTable {
    pub nodes: Vec<f64>,
    /// `∫_1^{u_k} ψ/ω`.
    mrel: Vec<f64>,
    /// `ψ/ω` at the nodes.
    pub dm: Vec<f64>,
    /// `(ψ/ω)′` at the nodes.
    pub d2m: Vec<f64>,
    /// `∫ ψ/ω` over each cell.
    pub cells: Vec<f64>,
    /// `∫_0^1 ψ/ω`, `None` when infinite.
    offset: Option<f64>,
    /// `m(u_k)` accumulated upward from 0, when the offset is finite.
    m_abs: Vec<f64>,
    g: Option<RelaxInterp>,
    ln_i: Vec<f64>,
    model: LogisticModel,
}

impl MTable {
    pub fn build(model: &LogisticModel) -> Self {
        let n = DECADES * PER_DECADE + 1;
        let mut nodes: Vec<f64> = (0..n).map(|k| U_LO * 10f64.powf(k as f64 / PER_DECADE as f64)).collect();
        nodes[ONE_INDEX] = 1.0;
        let ratio = |u: f64| model.psi(u) / model.omega(u);
        let dm: Vec<f64> = nodes.iter().map(|&u| ratio(u)).collect();
        let d2m: Vec<f64> = nodes
            .iter()
            .map(|&u| {
                let w = model.omega(u);
                let dw = model.c + model.sigma * model.sigma * u;
                (model.branching.psi_prime(u) - model.psi(u) * dw / w) / w
            })
            .collect();
        let cells: Vec<f64> = nodes.windows(2).map(|w| gauss10(ratio, w[0], w[1])).collect();
        let tol = Tolerance::new(1e-13, 1e-16);
        let mut mrel = vec![0.0; n];
        for k in ONE_INDEX + 1..n {
            mrel[k] = mrel[k - 1] + cells[k - 1];
        }
        for k in (0..ONE_INDEX).rev() {
            mrel[k] = mrel[k + 1] - cells[k];
        }
        let head = integrate_log(ratio, 0.0, U_LO, tol);
        let offset = (head.converged && head.value.is_finite()).then(|| head.value - mrel[0]);

        let mut t = Self { nodes, mrel, dm, d2m, cells, offset, m_abs: vec![], g: None, ln_i: vec![], model: model.clone() };
        if offset.is_some() {
            let mut m_abs = vec![head.value; n];
            for k in 0..n - 1 {
                m_abs[k + 1] = m_abs[k] + t.cells[k];
            }
            t.m_abs = m_abs;
            // G_{k+1} = G_k e^{-Δm} + ∫_cell e^{m(u) - m_{k+1}} du, G ≈ u below the grid
            let mut g = vec![U_LO; n];
            for k in 0..n - 1 {
                let cell = t.cell_weight(k, t.dm[k + 1], t.d2m[k + 1], |u| t.to_next(k, u));
                g[k + 1] = g[k] * (-t.cells[k]).exp() + cell;
            }
            t.ln_i = (0..n).map(|k| g[k].ln() + t.m_abs[k]).collect();
            t.g = Some(RelaxInterp::new(&t.nodes, g, &t.dm, &t.d2m));
        }
        t
    }

    fn cell(&self, u: f64) -> usize {
        let k = ((u / U_LO).log10() * PER_DECADE as f64).floor() as isize;
        let mut k = k.clamp(0, self.nodes.len() as isize - 2) as usize;
        while k > 0 && u < self.nodes[k] {
            k -= 1;
        }
        while k + 2 < self.nodes.len() && u > self.nodes[k + 1] {
            k += 1;
        }
        k
    }

    /// `m(u) - m(u_{k+1})` inside cell `k`, free of cancellation.
    pub fn to_next(&self, k: usize, u: f64) -> f64 {
        hermite5(self.nodes[k], self.nodes[k + 1], (-self.cells[k], 0.0), (self.dm[k], self.dm[k + 1]), (self.d2m[k], self.d2m[k + 1]), u)
    }

    /// `∫_cell e^{e(u)} du` for an exponent with `e(u_{k+1}) = 0` that may
    /// form a thin boundary layer at the right end. Stiff cells are split
    /// where `e = -60` so the adaptive rule sees the layer. `(a, b)` are
    /// `-e′` and `-e″` at the right end: in very stiff cells the exponent
    /// is replaced by `-as + bs²/2`, `s = u_{k+1} - u`, since the
    /// interpolant of a huge `e` cancels catastrophically there.
    pub fn cell_weight(&self, k: usize, a: f64, b: f64, e: impl Fn(f64) -> f64) -> f64 {
        let (u0, u1) = (self.nodes[k], self.nodes[k + 1]);
        if a * (u1 - u0) > 1e6 {
            let span = (u1 - u0).min(100.0 / a);
            return integrate(|s| (-a * s + 0.5 * b * s * s).exp(), 0.0, span, Tolerance::new(1e-13, 1e-300)).value;
        }
        if e(u0) > -1.0 {
            return gauss10(|u| e(u).exp(), u0, u1);
        }
        let tol = Tolerance::new(1e-13, 1e-300);
        let (mut lo, mut hi) = (u0, u1);
        if e(u0) < -60.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if e(mid) < -60.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let split = lo;
        let near = integrate(|u| e(u).exp(), split, u1, tol).value;
        let far = if split > u0 { integrate(|u| e(u).exp(), u0, split, tol).value } else { 0.0 };
        near + far
    }

    fn mrel_in(&self, k: usize, u: f64) -> f64 {
        self.mrel[k + 1] + self.to_next(k, u)
    }

    pub fn u_hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// `∫_1^u ψ/ω`, finite without any moment condition.
    pub fn mrel(&self, u: f64) -> f64 {
        let ratio = |v: f64| self.model.psi(v) / self.model.omega(v);
        if u < U_LO {
            return self.mrel[0] - integrate_log(ratio, u, U_LO, Tolerance::new(1e-12, 1e-300)).value;
        }
        if u > self.u_hi() {
            return self.mrel.last().unwrap() + integrate_log(ratio, self.u_hi(), u, Tolerance::new(1e-12, 1e-300)).value;
        }
        self.mrel_in(self.cell(u), u)
    }

    /// `m(u)`; callers check the log-moment condition first.
    pub fn m(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let off = self.offset.expect("m needs the log-moment condition");
        if u < U_LO || u > self.u_hi() {
            return off + self.mrel(u);
        }
        let k = self.cell(u);
        self.m_abs[k + 1] + self.to_next(k, u)
    }

    /// `m′ = ψ/ω`.
    pub fn mrate(&self, u: f64) -> f64 {
        self.model.psi(u) / self.model.omega(u)
    }

    /// `G = e^{-m} I` inside cell `k`.
    pub fn g_in(&self, k: usize, u: f64) -> f64 {
        let g = self.g.as_ref().expect("G needs the log-moment condition");
        g.eval(&self.nodes, k, u, || self.mrate(u))
    }

    /// `ln I(u)`; below the grid `I(u) ≈ u`.
    pub fn ln_i(&self, u: f64) -> f64 {
        if u < U_LO {
            return u.ln() + 0.5 * self.m(u);
        }
        if u > self.u_hi() {
            return f64::INFINITY;
        }
        let k = self.cell(u);
        self.g_in(k, u).ln() + self.m(u)
    }

    /// Cell `[u_k, u_{k+1}]` whose `ln I` range contains `t`.
    pub fn bracket_ln_i(&self, t: f64) -> Option<(f64, f64)> {
        if self.ln_i.is_empty() || !(t <= *self.ln_i.last().unwrap()) {
            return None;
        }
        if t < self.ln_i[0] {
            return Some((t.exp() * 0.5, U_LO));
        }
        let k = self.ln_i.partition_point(|&v| v < t).max(1);
        Some((self.nodes[k - 1], self.nodes[k]))
    }
}
