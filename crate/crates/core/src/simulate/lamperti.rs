//! Lamperti-type time change between the competition process `Z` and the
//! autonomous process `R` driven by the Lévy process `X`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::engine::poisson;
use super::{path_rng, require_start, PathSample, SimConfig};
use crate::mechanisms::{Interval, ModelSpec};
use crate::{CbreError, Result};

/// Euler path of `dR = dX - g(R)/R dt + σ√R dW` killed at 0, where `X` has
/// Laplace exponent ψ and drift `b + d` (the environment drift rides on
/// the linear term). The environment must be Brownian.
pub fn simulate_sde1(model: &ModelSpec, x0: f64, cfg: &SimConfig) -> Result<PathSample> {
    require_start(x0)?;
    if !model.environment.pi.is_empty() {
        return Err(CbreError::RegimeMismatch("the time change needs a Brownian environment".into()));
    }
    let res = cfg.resolve(model, x0)?;
    let br = &model.branching;
    let eps = res.eps;
    let comp = if br.mu.is_empty() || eps >= 1.0 { 0.0 } else { br.mu.moment(1.0, Interval::open(eps, 1.0)) };
    let drift = br.b + model.environment.d - comp;
    let two_gamma2 = 2.0 * br.gamma * br.gamma;
    let sigma = model.environment.sigma;
    let jumps = br.mu.sampler(eps, true);
    let mut rng = path_rng(cfg.seed, 0);

    let mut p = PathSample { times: vec![0.0], values: vec![x0], absorbed_at: None, exploded: false };
    if x0 <= 0.0 {
        p.absorbed_at = Some(0.0);
        return Ok(p);
    }
    let n = (res.t_max / res.dt - 1e-9).ceil().max(0.0) as usize;
    let mut r = x0;
    for k in 0..n {
        let h = (res.t_max - k as f64 * res.dt).min(res.dt);
        let t = if k + 1 == n { res.t_max } else { (k + 1) as f64 * res.dt };
        let n1: f64 = if two_gamma2 > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        let n2: f64 = if sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        let mut next = r + (drift - model.g(r) / r) * h + (two_gamma2 * h).sqrt() * n1 + sigma * (r * h).sqrt() * n2;
        if jumps.rate > 0.0 {
            for _ in 0..poisson(&mut rng, jumps.rate * h) {
                next += jumps.sample(&mut rng);
            }
        }
        if !(next > res.floor) {
            p.times.push(t);
            p.values.push(0.0);
            p.absorbed_at = Some(t);
            return Ok(p);
        }
        if next > res.ceiling {
            p.times.push(t);
            p.values.push(next);
            p.exploded = true;
            return Ok(p);
        }
        r = next;
        if (k + 1) % cfg.record_stride == 0 || k + 1 == n {
            p.times.push(t);
            p.values.push(r);
        }
    }
    Ok(p)
}

/// `η_s = ∫_0^{s ∧ T_0^R} du/R_u` on the grid of `R` and its inverse `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeChange {
    /// `(s, η_s)` at the live grid points of `R`.
    pub eta: Vec<(f64, f64)>,
    /// `(t, C_t)`, the same pairs swapped.
    pub c: Vec<(f64, f64)>,
    /// `η_∞` when `R` is absorbed inside the window.
    pub eta_infinity: Option<f64>,
}

impl TimeChange {
    /// `C_t` by linear interpolation, `None` beyond the last sample.
    pub fn c_at(&self, t: f64) -> Option<f64> {
        let k = self.c.partition_point(|p| p.0 <= t);
        if k == 0 {
            return Some(self.c[0].1);
        }
        if k == self.c.len() {
            return (t == self.c[k - 1].0).then_some(self.c[k - 1].1);
        }
        let (a, b) = (self.c[k - 1], self.c[k]);
        Some(a.1 + (t - a.0) / (b.0 - a.0) * (b.1 - a.1))
    }
}

/// Index of the last grid point with `R > 0`.
fn live_end(path: &PathSample) -> usize {
    match path.absorbed_at {
        Some(_) => path.values.iter().position(|&v| v <= 0.0).unwrap_or(path.len()).saturating_sub(1),
        None => path.len() - 1,
    }
}

/// Trapezoidal `η` on the live window. The step into absorption uses the
/// left value only, since the linear interpolant to 0 has a divergent
/// reciprocal integral that the true path does not.
pub fn time_change(path_r: &PathSample) -> Result<TimeChange> {
    if path_r.is_empty() || path_r.values[0] <= 0.0 {
        return Err(CbreError::Domain("degenerate window: R starts at 0".into()));
    }
    let end = live_end(path_r);
    if end == 0 && path_r.absorbed_at.is_some() {
        return Err(CbreError::Domain("degenerate window: R is absorbed in its first step".into()));
    }
    let (s, r) = (&path_r.times, &path_r.values);
    let mut eta = Vec::with_capacity(end + 1);
    let mut acc = 0.0;
    eta.push((s[0], 0.0));
    for k in 0..end {
        acc += 0.5 * (s[k + 1] - s[k]) * (1.0 / r[k] + 1.0 / r[k + 1]);
        eta.push((s[k + 1], acc));
    }
    let eta_infinity = path_r.absorbed_at.map(|a| acc + (a - s[end]) / r[end]);
    let c = eta.iter().map(|&(s, e)| (e, s)).collect();
    Ok(TimeChange { eta, c, eta_infinity })
}

/// `Z_t = R_{C_t}` followed by the reciprocal change `C_t = ∫_0^t Z` to
/// recover `R`. Returns `(Z, recovered R)`.
pub fn lamperti_round_trip(path_r: &PathSample) -> Result<(PathSample, PathSample)> {
    let tc = time_change(path_r)?;
    let end = tc.eta.len() - 1;
    // Z at t = η_{s_k} equals R_{s_k} exactly
    let mut z = PathSample {
        times: tc.eta.iter().map(|p| p.1).collect(),
        values: path_r.values[..=end].to_vec(),
        absorbed_at: tc.eta_infinity,
        exploded: path_r.exploded,
    };
    if let Some(e) = tc.eta_infinity {
        z.times.push(e);
        z.values.push(0.0);
    }

    // C_t = ∫_0^t Z with the harmonic-mean rule, the discrete inverse of the
    // trapezoidal η (both second order); trapezoid here would drift the
    // clock by about dt·σ²η/4. R at time C_t is Z_t.
    let mut rec = PathSample { times: vec![0.0], values: vec![z.values[0]], absorbed_at: None, exploded: false };
    let mut acc = 0.0;
    for j in 0..z.len() - 1 {
        let (a, b) = (z.values[j], z.values[j + 1]);
        let dt = z.times[j + 1] - z.times[j];
        acc += if b > 0.0 { dt * 2.0 * a * b / (a + b) } else { dt * a };
        rec.times.push(acc);
        rec.values.push(b);
    }
    if z.absorbed_at.is_some() {
        rec.absorbed_at = rec.times.last().copied();
    }
    Ok((z, rec))
}

/// Sup distance between `R` and its recovered copy on the common window
/// before absorption, checked at the grid points of both.
pub fn round_trip_error(original: &PathSample, recovered: &PathSample) -> f64 {
    let horizon = |p: &PathSample| p.absorbed_at.unwrap_or(*p.times.last().unwrap());
    let window = horizon(original).min(horizon(recovered));
    let mut worst: f64 = 0.0;
    for (a, b) in [(original, recovered), (recovered, original)] {
        for (&t, &v) in a.times.iter().zip(&a.values) {
            if t < window {
                worst = worst.max((v - b.value_at(t)).abs());
            }
        }
    }
    worst
}
