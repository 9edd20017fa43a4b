//! Lévy measures on the positive axis or on ℝ∖{0}.
//!
//! Density families (power law, tabulated) are stored as piecewise power-law
//! segments `k·z^s` on `(lo, hi)`, which gives closed-form masses, moments
//! and inverse-CDF sampling; tabulated densities are log-linear between
//! their sample points.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CbreError, Result};
use crate::quadrature::{integrate, integrate_improper, integrate_line, integrate_log, Hints, IntegralResult, Tolerance};

/// Which half-lines a density family charges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Positive,
    /// Mirror the positive-axis density onto the negative axis.
    Symmetric,
}

/// Normalised jump-size law of a compound Poisson measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    /// `(position, weight)` pairs; weights are normalised to sum to 1.
    Atoms { atoms: Vec<(f64, f64)> },
    Exponential { mean: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

/// Serializable description of a Lévy measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LevyMeasureSpec {
    Empty,
    CompoundPoisson {
        rate: f64,
        jumps: JumpLaw,
    },
    /// Density `c·z^{-1-alpha}` on `(lower, upper)`.
    PowerLaw {
        c: f64,
        alpha: f64,
        #[serde(default)]
        lower: f64,
        #[serde(default)]
        upper: Option<f64>,
        #[serde(default)]
        side: Side,
    },
    /// Density samples on an increasing grid of positive abscissae.
    Tabulated {
        z: Vec<f64>,
        density: Vec<f64>,
        #[serde(default)]
        side: Side,
    },
}

/// Interval of the real line with per-end closedness (matters for atoms).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: true }
    }
    pub fn contains(&self, z: f64) -> bool {
        let above = if self.lo_closed { z >= self.lo } else { z > self.lo };
        let below = if self.hi_closed { z <= self.hi } else { z < self.hi };
        above && below && z != 0.0
    }
    /// Positive half `(0, ∞)` intersected with `self`, as plain bounds.
    fn positive_part(&self) -> Option<(f64, f64)> {
        let lo = self.lo.max(0.0);
        let hi = self.hi;
        (hi > lo).then_some((lo, hi))
    }
    /// Mirror image of the negative half, as bounds on |z|.
    fn negative_part_abs(&self) -> Option<(f64, f64)> {
        let lo = (-self.hi).max(0.0);
        let hi = -self.lo;
        (hi > lo).then_some((lo, hi))
    }
}

#[derive(Clone, Copy, Debug)]
struct Seg {
    lo: f64,
    hi: f64,
    k: f64,
    s: f64,
}

impl Seg {
    /// `∫_x^y z^p · k z^s dz` for `lo <= x < y <= hi` (may be infinite).
    fn power_integral(&self, p: f64, x: f64, y: f64) -> f64 {
        let x = x.max(self.lo);
        let y = y.min(self.hi);
        if y <= x {
            return 0.0;
        }
        let e = self.s + p + 1.0;
        if e.abs() < 1e-12 {
            return self.k * (y.ln() - x.ln());
        }
        let yt = if y.is_infinite() {
            if e < 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            y.powf(e)
        };
        let xt = if x == 0.0 {
            if e > 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            x.powf(e)
        };
        if xt.is_infinite() || yt.is_infinite() {
            return f64::INFINITY;
        }
        self.k * (yt - xt) / e
    }

    fn density(&self, z: f64) -> f64 {
        self.k * z.powf(self.s)
    }

    /// Inverse-CDF draw of the restriction to `(x, y)`.
    fn sample(&self, x: f64, y: f64, u: f64) -> f64 {
        let e = self.s + 1.0;
        if e.abs() < 1e-12 {
            return x * (y / x).powf(u);
        }
        let xe = x.powf(e);
        let ye = if y.is_infinite() { 0.0 } else { y.powf(e) };
        (xe + u * (ye - xe)).powf(1.0 / e)
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Empty,
    Atoms(Vec<(f64, f64)>),
    Exponential { rate: f64, mean: f64 },
    Uniform { rate: f64, lo: f64, hi: f64 },
    Normal { rate: f64, mean: f64, sd: f64 },
    Segments { segs: Vec<Seg>, mirror: bool },
}

/// Validated Lévy measure with evaluation helpers.
#[derive(Clone, Debug)]
pub struct LevyMeasure {
    spec: LevyMeasureSpec,
    repr: Repr,
}

impl Default for LevyMeasure {
    fn default() -> Self {
        Self::empty()
    }
}

impl PartialEq for LevyMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Serialize for LevyMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LevyMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = LevyMeasureSpec::deserialize(d)?;
        LevyMeasure::new(spec).map_err(serde::de::Error::custom)
    }
}

const QTOL: Tolerance = Tolerance { rtol: 1e-12, atol: 1e-300, max_subdivisions: 2000 };

fn invalid(msg: impl Into<String>) -> CbreError {
    CbreError::InvalidModel(msg.into())
}

impl LevyMeasure {
    pub fn empty() -> Self {
        Self { spec: LevyMeasureSpec::Empty, repr: Repr::Empty }
    }

    /// Compound Poisson measure with finitely many atoms `(position, mass)`.
    pub fn atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let rate: f64 = atoms.iter().map(|a| a.1).sum();
        Self::new(LevyMeasureSpec::CompoundPoisson { rate, jumps: JumpLaw::Atoms { atoms: atoms.to_vec() } })
    }

    pub fn power_law(c: f64, alpha: f64, lower: f64, upper: Option<f64>, side: Side) -> Result<Self> {
        Self::new(LevyMeasureSpec::PowerLaw { c, alpha, lower, upper, side })
    }

    pub fn tabulated(z: Vec<f64>, density: Vec<f64>, side: Side) -> Result<Self> {
        Self::new(LevyMeasureSpec::Tabulated { z, density, side })
    }

    /// Validate the family parameters and the integrability of `1∧z²`.
    pub fn new(spec: LevyMeasureSpec) -> Result<Self> {
        let repr = match &spec {
            LevyMeasureSpec::Empty => Repr::Empty,
            LevyMeasureSpec::CompoundPoisson { rate, jumps } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(invalid(format!("compound Poisson rate must be finite and >= 0, got {rate}")));
                }
                match jumps {
                    JumpLaw::Atoms { atoms } => {
                        let total: f64 = atoms.iter().map(|a| a.1).sum();
                        if atoms.is_empty() || !(total > 0.0) || atoms.iter().any(|a| !(a.1 >= 0.0) || !a.0.is_finite() || a.0 == 0.0) {
                            return Err(invalid("atoms need finite non-zero positions and non-negative weights with positive sum"));
                        }
                        Repr::Atoms(atoms.iter().filter(|a| a.1 > 0.0).map(|a| (a.0, rate * a.1 / total)).collect())
                    }
                    JumpLaw::Exponential { mean } => {
                        if !(mean.is_finite() && *mean > 0.0) {
                            return Err(invalid("exponential jump mean must be positive"));
                        }
                        Repr::Exponential { rate: *rate, mean: *mean }
                    }
                    JumpLaw::Uniform { lo, hi } => {
                        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                            return Err(invalid("uniform jump law needs lo < hi"));
                        }
                        Repr::Uniform { rate: *rate, lo: *lo, hi: *hi }
                    }
                    JumpLaw::Normal { mean, sd } => {
                        if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) {
                            return Err(invalid("normal jump law needs sd > 0"));
                        }
                        Repr::Normal { rate: *rate, mean: *mean, sd: *sd }
                    }
                }
            }
            LevyMeasureSpec::PowerLaw { c, alpha, lower, upper, side } => {
                let upper = upper.unwrap_or(f64::INFINITY);
                if !(c.is_finite() && *c > 0.0 && alpha.is_finite() && *alpha > 0.0 && *lower >= 0.0 && upper > *lower) {
                    return Err(invalid("power law needs c > 0, alpha > 0 and 0 <= lower < upper"));
                }
                Repr::Segments { segs: vec![Seg { lo: *lower, hi: upper, k: *c, s: -1.0 - alpha }], mirror: *side == Side::Symmetric }
            }
            LevyMeasureSpec::Tabulated { z, density, side } => {
                if z.len() < 2 || z.len() != density.len() {
                    return Err(invalid("tabulated measure needs at least two (z, density) samples of equal length"));
                }
                if z[0] <= 0.0 || z.windows(2).any(|w| !(w[1] > w[0])) || z.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("tabulated abscissae must be positive, finite and strictly increasing"));
                }
                if density.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                    return Err(invalid("tabulated densities must be positive and finite"));
                }
                let segs = z
                    .windows(2)
                    .zip(density.windows(2))
                    .map(|(zw, dw)| {
                        let s = (dw[1] / dw[0]).ln() / (zw[1] / zw[0]).ln();
                        Seg { lo: zw[0], hi: zw[1], k: dw[0] / zw[0].powf(s), s }
                    })
                    .collect();
                Repr::Segments { segs, mirror: *side == Side::Symmetric }
            }
        };
        let m = Self { spec, repr };
        let small = m.moment(2.0, Interval::open(-1.0, 1.0));
        let big = m.mass(Interval::closed_open(1.0, f64::INFINITY)) + m.mass(Interval::open_closed(f64::NEG_INFINITY, -1.0));
        if !(small.is_finite() && big.is_finite()) {
            return Err(CbreError::DivergentMeasure(format!("∫(1∧z²) is not finite (small-jump part {small}, large-jump mass {big})")));
        }
        Ok(m)
    }

    pub fn spec(&self) -> &LevyMeasureSpec {
        &self.spec
    }

    pub fn is_empty(&self) -> bool {
        match &self.repr {
            Repr::Empty => true,
            Repr::Atoms(a) => a.is_empty(),
            Repr::Exponential { rate, .. } | Repr::Uniform { rate, .. } | Repr::Normal { rate, .. } => *rate == 0.0,
            Repr::Segments { .. } => false,
        }
    }

    /// True when the measure charges only `(0, ∞)`.
    pub fn is_positive_only(&self) -> bool {
        match &self.repr {
            Repr::Empty | Repr::Exponential { .. } => true,
            Repr::Atoms(a) => a.iter().all(|x| x.0 > 0.0),
            Repr::Uniform { lo, .. } => *lo >= 0.0,
            Repr::Normal { rate, .. } => *rate == 0.0,
            Repr::Segments { mirror, .. } => !mirror,
        }
    }

    /// Total mass when finite (compound Poisson); `+inf` otherwise.
    pub fn total_mass(&self) -> f64 {
        self.mass(Interval::open(f64::NEG_INFINITY, f64::INFINITY))
    }

    /// `μ(I)`.
    pub fn mass(&self, iv: Interval) -> f64 {
        self.moment(0.0, iv)
    }

    /// Tail mass `μ((x, ∞))` for `x >= 0`.
    pub fn tail(&self, x: f64) -> f64 {
        self.mass(Interval::open(x, f64::INFINITY))
    }

    /// Negative tail `μ((-∞, -x))` for `x >= 0`.
    pub fn neg_tail(&self, x: f64) -> f64 {
        self.mass(Interval::open(f64::NEG_INFINITY, -x))
    }

    /// `∫_I |z|^p μ(dz)`, `+inf` when divergent.
    pub fn moment(&self, p: f64, iv: Interval) -> f64 {
        match &self.repr {
            Repr::Empty => 0.0,
            Repr::Atoms(a) => a.iter().filter(|x| iv.contains(x.0)).map(|x| x.1 * x.0.abs().powf(p)).sum(),
            Repr::Segments { segs, mirror } => {
                let mut acc = 0.0;
                if let Some((x, y)) = iv.positive_part() {
                    acc += segs.iter().map(|s| s.power_integral(p, x, y)).sum::<f64>();
                }
                if *mirror {
                    if let Some((x, y)) = iv.negative_part_abs() {
                        acc += segs.iter().map(|s| s.power_integral(p, x, y)).sum::<f64>();
                    }
                }
                acc
            }
            _ => {
                let r = self.integrate(|z| z.abs().powf(p), iv);
                if r.converged { r.value } else { f64::INFINITY }
            }
        }
    }

    /// `∫_I f(z) μ(dz)` by closed sums (atoms) or adaptive quadrature.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, iv: Interval) -> IntegralResult {
        self.integrate_tol(&mut f, iv, QTOL)
    }

    pub fn integrate_tol<F: FnMut(f64) -> f64>(&self, f: &mut F, iv: Interval, tol: Tolerance) -> IntegralResult {
        match &self.repr {
            Repr::Empty => IntegralResult::exact(0.0),
            Repr::Atoms(a) => IntegralResult::exact(a.iter().filter(|x| iv.contains(x.0)).map(|x| x.1 * f(x.0)).sum()),
            Repr::Exponential { rate, mean } => match iv.positive_part() {
                None => IntegralResult::exact(0.0),
                Some((x, y)) => {
                    let dens = |z: f64| rate / mean * (-z / mean).exp();
                    let span = (y - x) / mean;
                    integrate_improper(|w| f(x + mean * w) * dens(x + mean * w) * mean, 0.0, span, Hints::exponential(), tol)
                }
            },
            Repr::Uniform { rate, lo, hi } => {
                let (x, y) = (iv.lo.max(*lo), iv.hi.min(*hi));
                if y <= x {
                    return IntegralResult::exact(0.0);
                }
                let d = rate / (hi - lo);
                if x < 0.0 && y > 0.0 {
                    let l = integrate(|z| f(z) * d, x, 0.0, tol);
                    let r = integrate(|z| f(z) * d, 0.0, y, tol);
                    IntegralResult::combine(&[l, r])
                } else {
                    integrate(|z| f(z) * d, x, y, tol)
                }
            }
            Repr::Normal { rate, mean, sd } => {
                let norm = rate / (sd * (2.0 * std::f64::consts::PI).sqrt());
                let mut g = |t: f64| {
                    let z = mean + sd * t;
                    if !iv.contains(z) {
                        return 0.0;
                    }
                    f(z) * norm * (-0.5 * t * t).exp() * sd
                };
                // split at the images of the interval ends and of 0
                let mut cuts = vec![(iv.lo - mean) / sd, (-mean) / sd, (iv.hi - mean) / sd];
                cuts.retain(|c| !c.is_nan());
                cuts.sort_by(f64::total_cmp);
                let mut parts = Vec::new();
                let mut prev = f64::NEG_INFINITY;
                for c in cuts.into_iter().chain(std::iter::once(f64::INFINITY)) {
                    if c > prev {
                        parts.push(integrate_line(&mut g, prev, c, tol));
                    }
                    prev = c;
                }
                IntegralResult::combine(&parts)
            }
            Repr::Segments { segs, mirror } => {
                let mut pieces: Vec<(&Seg, f64, f64, f64)> = Vec::new();
                for (side, range) in [(1.0, iv.positive_part()), (-1.0, if *mirror { iv.negative_part_abs() } else { None })] {
                    if let Some((x, y)) = range {
                        for s in segs {
                            let (a, b) = (x.max(s.lo), y.min(s.hi));
                            if b > a {
                                pieces.push((s, a, b, side));
                            }
                        }
                    }
                }
                // Accuracy is owed to the total, so a coarse midpoint estimate of it
                // sets an absolute floor per piece; otherwise pieces whose integrand
                // is subnormal chase a relative tolerance they cannot reach.
                let mut scale = 0.0;
                for &(s, a, b, side) in &pieces {
                    let (ta, tb) = (a.ln(), b.ln());
                    for j in 0..4 {
                        let z = (ta + (tb - ta) * (j as f64 + 0.5) / 4.0).exp();
                        let v = weighted(f(side * z), s, z) * z * (tb - ta) / 4.0;
                        if v.is_finite() {
                            scale += v.abs();
                        }
                    }
                }
                let mut piece_tol = tol;
                if !pieces.is_empty() {
                    piece_tol.atol = tol.atol.max(tol.rtol * scale / pieces.len() as f64);
                }
                let parts: Vec<IntegralResult> =
                    pieces.iter().map(|&(s, a, b, side)| integrate_log(|z| weighted(f(side * z), s, z), a, b, piece_tol)).collect();
                IntegralResult::combine(&parts)
            }
        }
    }

    /// Sampler for jumps with `|z| > eps`; `positive_only` drops the negative axis.
    pub fn sampler(&self, eps: f64, positive_only: bool) -> JumpSampler {
        let keep = |z: f64| z.abs() > eps && (!positive_only || z > 0.0);
        match &self.repr {
            Repr::Empty => JumpSampler::none(),
            Repr::Atoms(a) => {
                let kept: Vec<(f64, f64)> = a.iter().copied().filter(|x| keep(x.0)).collect();
                JumpSampler::discrete(kept)
            }
            Repr::Exponential { rate, mean } => {
                let r = rate * (-eps / mean).exp();
                JumpSampler { rate: r, kind: SamplerKind::ShiftedExp { eps, mean: *mean } }
            }
            Repr::Uniform { rate, lo, hi } => {
                let d = rate / (hi - lo);
                let mut pieces = Vec::new();
                if *hi > eps {
                    pieces.push((lo.max(eps), *hi));
                }
                if !positive_only && *lo < -eps {
                    pieces.push((*lo, hi.min(-eps)));
                }
                let weights: Vec<f64> = pieces.iter().map(|p| (p.1 - p.0) * d).collect();
                JumpSampler::pieces(pieces.into_iter().map(|(a, b)| Piece::Uniform(a, b)).collect(), weights)
            }
            Repr::Normal { rate, mean, sd } => {
                use statrs::function::erf::erfc;
                let up = 0.5 * erfc((eps - mean) / (sd * std::f64::consts::SQRT_2));
                let down = if positive_only { 0.0 } else { 0.5 * erfc((eps + mean) / (sd * std::f64::consts::SQRT_2)) };
                JumpSampler { rate: rate * (up + down), kind: SamplerKind::Normal { mean: *mean, sd: *sd, eps, positive_only } }
            }
            Repr::Segments { segs, mirror } => {
                let mut pieces = Vec::new();
                let mut weights = Vec::new();
                let sides: &[f64] = if *mirror && !positive_only { &[1.0, -1.0] } else { &[1.0] };
                for &sign in sides {
                    for s in segs {
                        let (a, b) = (eps.max(s.lo), s.hi);
                        if b > a {
                            let w = s.power_integral(0.0, a, b);
                            if w > 0.0 {
                                pieces.push(Piece::Power { seg: *s, a, b, sign });
                                weights.push(w);
                            }
                        }
                    }
                }
                JumpSampler::pieces(pieces, weights)
            }
        }
    }
}

/// `v·k z^s`, falling back to logarithms when the density overflows.
fn weighted(v: f64, seg: &Seg, z: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let direct = v * seg.density(z);
    if direct.is_finite() {
        return direct;
    }
    v.signum() * (v.abs().ln() + seg.k.ln() + seg.s * z.ln()).exp()
}

#[derive(Clone, Debug)]
enum Piece {
    Uniform(f64, f64),
    Power { seg: Seg, a: f64, b: f64, sign: f64 },
}

#[derive(Clone, Debug)]
enum SamplerKind {
    None,
    Discrete { cum: Vec<f64>, z: Vec<f64> },
    ShiftedExp { eps: f64, mean: f64 },
    Normal { mean: f64, sd: f64, eps: f64, positive_only: bool },
    Pieces { cum: Vec<f64>, pieces: Vec<Piece> },
}

/// Draws jump sizes from the normalised restriction of a measure to `|z| > eps`.
#[derive(Clone, Debug)]
pub struct JumpSampler {
    /// Mass of the restricted measure (jump intensity per unit time and state).
    pub rate: f64,
    kind: SamplerKind,
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc / total
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c < u).min(cum.len() - 1)
}

impl JumpSampler {
    fn none() -> Self {
        Self { rate: 0.0, kind: SamplerKind::None }
    }

    fn discrete(atoms: Vec<(f64, f64)>) -> Self {
        if atoms.is_empty() {
            return Self::none();
        }
        let w: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        Self { rate: w.iter().sum(), kind: SamplerKind::Discrete { cum: cumulative(&w), z: atoms.iter().map(|a| a.0).collect() } }
    }

    fn pieces(pieces: Vec<Piece>, weights: Vec<f64>) -> Self {
        let rate: f64 = weights.iter().sum();
        if pieces.is_empty() || rate <= 0.0 {
            return Self::none();
        }
        Self { rate, kind: SamplerKind::Pieces { cum: cumulative(&weights), pieces } }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::None => 0.0,
            SamplerKind::Discrete { cum, z } => z[pick(cum, rng.random::<f64>())],
            SamplerKind::ShiftedExp { eps, mean } => {
                let u: f64 = rng.random();
                eps - mean * (1.0 - u).ln()
            }
            SamplerKind::Normal { mean, sd, eps, positive_only } => loop {
                let z = mean + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
                if z.abs() > *eps && (!positive_only || z > 0.0) {
                    break z;
                }
            },
            SamplerKind::Pieces { cum, pieces } => {
                let u: f64 = rng.random();
                match &pieces[pick(cum, u)] {
                    Piece::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
                    Piece::Power { seg, a, b, sign } => {
                        let v: f64 = rng.random();
                        sign * seg.sample(*a, *b, v.max(f64::MIN_POSITIVE))
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn power_law_moment_flags() {
        let m = LevyMeasure::power_law(1.0, 1.5, 0.0, None, Side::Positive).unwrap();
        assert!(m.moment(2.0, Interval::open(0.0, 1.0)).is_finite());
        assert!(m.moment(1.0, Interval::open(0.0, 1.0)).is_infinite());
        assert_relative_eq!(m.tail(2.0), 2f64.powf(-1.5) / 1.5, max_relative = 1e-14);
        assert_relative_eq!(m.moment(1.0, Interval::open(1.0, f64::INFINITY)), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn divergent_measure_rejected() {
        let r = LevyMeasure::power_law(1.0, 2.5, 0.0, None, Side::Positive);
        assert!(matches!(r, Err(CbreError::DivergentMeasure(_))));
    }

    #[test]
    fn quadrature_matches_closed_form_moments() {
        let m = LevyMeasure::tabulated(vec![0.1, 0.5, 2.0, 7.0], vec![3.0, 1.0, 0.2, 0.01], Side::Symmetric).unwrap();
        for p in [0.0, 1.0, 2.0] {
            let iv = Interval::open(-5.0, 3.0);
            let q = m.integrate(|z| z.abs().powf(p), iv);
            assert_relative_eq!(q.value, m.moment(p, iv), max_relative = 1e-10);
        }
    }

    #[test]
    fn exponential_and_normal_masses() {
        let e = LevyMeasure::new(LevyMeasureSpec::CompoundPoisson { rate: 2.0, jumps: JumpLaw::Exponential { mean: 0.5 } }).unwrap();
        assert_relative_eq!(e.tail(1.0), 2.0 * (-2.0f64).exp(), max_relative = 1e-10);
        let n = LevyMeasure::new(LevyMeasureSpec::CompoundPoisson { rate: 3.0, jumps: JumpLaw::Normal { mean: 0.2, sd: 0.7 } }).unwrap();
        assert_relative_eq!(n.total_mass(), 3.0, max_relative = 1e-10);
        assert_relative_eq!(n.sampler(0.1, false).rate, n.mass(Interval::open(0.1, f64::INFINITY)) + n.neg_tail(0.1), max_relative = 1e-9);
    }

    #[test]
    fn atoms_respect_interval_closedness() {
        let m = LevyMeasure::atoms(&[(1.0, 2.0), (0.5, 1.0)]).unwrap();
        assert_eq!(m.mass(Interval::open(0.0, 1.0)), 1.0);
        assert_eq!(m.mass(Interval::closed_open(1.0, f64::INFINITY)), 2.0);
        assert_eq!(m.tail(1.0), 0.0);
    }

    #[test]
    fn sampler_mean_matches_measure() {
        let m = LevyMeasure::power_law(0.5, 1.2, 0.0, Some(20.0), Side::Positive).unwrap();
        let eps = 0.01;
        let s = m.sampler(eps, true);
        assert_relative_eq!(s.rate, m.tail(eps) - m.tail(20.0), max_relative = 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x > eps && x < 20.0));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let exact = m.moment(1.0, Interval::open(eps, 20.0)) / s.rate;
        assert!((mean - exact).abs() < 4.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn spec_round_trip() {
        let js = r#"{"family":"compound_poisson","rate":0.1,"jumps":{"law":"atoms","atoms":[[0.5,1.0],[-0.5,1.0]]}}"#;
        let m: LevyMeasure = serde_json::from_str(js).unwrap();
        assert!(!m.is_positive_only());
        assert_relative_eq!(m.total_mass(), 0.1);
        let back = serde_json::to_string(&m).unwrap();
        let again: LevyMeasure = serde_json::from_str(&back).unwrap();
        assert_eq!(m, again);
    }
}
