//! Monte Carlo engine for the defining SDEs: Euler paths with thinned
//! state-proportional jumps, hitting-time estimators with censoring bounds,
//! shared-noise coupling, and the Lamperti time change.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path
//! index)`, and results are reduced in path order, so output does not
//! depend on the worker count.

mod engine;
mod hitting;
mod lamperti;
mod paths;

#[cfg(test)]
mod tests;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mechanisms::{Interval, ModelSpec};
use crate::{CbreError, Result};

pub use hitting::{estimate_exit, estimate_hitting, estimate_path_integral_laplace, ExitEstimate};
pub use lamperti::{lamperti_round_trip, round_trip_error, simulate_sde1, time_change, TimeChange};
pub use paths::{coupled_pair, coupled_paths, coupling_check, occupation_samples, ordering_violation, simulate_path, simulate_paths, CouplingReport};

/// Simulation controls. Optional fields are resolved against the model and
/// the start point by [`SimConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    /// Smallest explicitly simulated jump; `None` picks it from the measure.
    pub jump_cutoff_eps: Option<f64>,
    /// State treated as 0; `None` means `1e-8·x0`.
    pub absorption_floor: Option<f64>,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// States above this are flagged as explosions.
    pub explosion_ceiling: f64,
    /// Keep every `record_stride`-th grid point in stored paths.
    pub record_stride: usize,
    /// Worker count; `None` uses the global pool. Never serialised, so
    /// summaries do not depend on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            jump_cutoff_eps: None,
            absorption_floor: None,
            t_max: 10.0,
            n_paths: 1000,
            seed: 0,
            explosion_ceiling: 1e12,
            record_stride: 1,
            threads: None,
        }
    }
}

/// Numeric controls after defaults are filled in.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Resolved {
    pub dt: f64,
    pub eps: f64,
    pub floor: f64,
    pub t_max: f64,
    pub ceiling: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CbreError::Domain(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if let Some(e) = self.jump_cutoff_eps {
            if !(e > 0.0) {
                return bad(format!("jump_cutoff_eps must be positive, got {e}"));
            }
        }
        if let Some(f) = self.absorption_floor {
            if !(f >= 0.0) {
                return bad(format!("absorption_floor must be non-negative, got {f}"));
            }
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be finite and non-negative, got {}", self.t_max));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if !(self.explosion_ceiling > 0.0) {
            return bad("explosion_ceiling must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn resolve(&self, model: &ModelSpec, x0: f64) -> Result<Resolved> {
        self.validate()?;
        Ok(Resolved {
            dt: self.dt,
            eps: self.jump_cutoff_eps.unwrap_or_else(|| default_jump_cutoff(model)),
            floor: self.absorption_floor.unwrap_or(1e-8 * x0),
            t_max: self.t_max,
            ceiling: self.explosion_ceiling,
        })
    }
}

/// Largest `ε = 10^{-k}` whose neglected small-jump variance
/// `∫_0^ε z²μ(dz)` is at most `1e-4·2γ²`, or `1e-4` of the total small-jump
/// variance when there is no Gaussian part.
pub fn default_jump_cutoff(model: &ModelSpec) -> f64 {
    let mu = &model.branching.mu;
    let pi = &model.environment.pi;
    let g2 = 2.0 * model.branching.gamma * model.branching.gamma;
    let budget_mu = 1e-4 * if g2 > 0.0 { g2 } else { mu.moment(2.0, Interval::open(0.0, 1.0)) };
    let budget_pi = 1e-4 * pi.moment(2.0, Interval::open(-1.0, 1.0)).max(f64::MIN_POSITIVE);
    for k in 1..=12 {
        let eps = 10f64.powi(-k);
        let small_mu = if mu.is_empty() { 0.0 } else { mu.moment(2.0, Interval::open(0.0, eps)) };
        let small_pi = if pi.is_empty() { 0.0 } else { pi.moment(2.0, Interval::open(-eps, eps)) };
        if small_mu <= budget_mu && small_pi <= budget_pi {
            return eps;
        }
    }
    1e-12
}

/// One simulated trajectory. After `absorbed_at` every value is exactly 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub absorbed_at: Option<f64>,
    pub exploded: bool,
}

impl PathSample {
    pub fn constant(value: f64, t_end: f64, dt: f64) -> Self {
        let n = (t_end / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        Self { values: vec![value; times.len()], times, absorbed_at: None, exploded: false }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation; 0 after absorption, last value past the end.
    pub fn value_at(&self, t: f64) -> f64 {
        if let Some(a) = self.absorbed_at {
            if t >= a {
                return 0.0;
            }
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0];
        }
        if k == self.times.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] + w * (self.values[k] - self.values[k - 1])
    }

    /// `t,value` rows with `# key=value` metadata lines on top.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let absorbed = self.absorbed_at.map_or("none".to_string(), |a| format!("{a:.17e}"));
        let _ = writeln!(s, "# absorbed_at={absorbed}");
        let _ = writeln!(s, "# exploded={}", self.exploded);
        s.push_str("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:.17e},{v:.17e}");
        }
        s
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in xs {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        if n == 0 {
            return Self { value: f64::NAN, stderr: f64::NAN };
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self { value: mean, stderr: (var / n as f64).sqrt() }
    }

    /// True when `x` is within `k` standard errors.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.stderr
    }
}

/// Censoring bounds for `E[e^{-λT}]`: censored paths count as 0 in `lower`
/// and as `e^{-λ t_max}` (or the path functional at `t_max`) in `upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub lambda: f64,
    pub lower: Estimate,
    pub upper: Estimate,
}

impl LaplaceEstimate {
    /// `x` lies in `[lower - kσ, upper + kσ]`.
    pub fn brackets(&self, x: f64, k: f64) -> bool {
        x >= self.lower.value - k * self.lower.stderr && x <= self.upper.value + k * self.upper.stderr
    }
}

/// Monte Carlo summary for `T_a = inf{t: Z_t ≤ a}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeEstimate {
    pub level: f64,
    pub n_paths: usize,
    pub p_hit_by_tmax: Estimate,
    /// Censored paths contribute `t_max`, so this is a lower bound unless
    /// `censored_fraction` is 0.
    pub mean_t: Estimate,
    /// Mean over the paths that hit, `None` when none did.
    pub mean_t_uncensored: Option<Estimate>,
    pub laplace: Vec<LaplaceEstimate>,
    pub censored_fraction: f64,
    pub warning: Option<String>,
}

/// RNG for path `index` of a run seeded with `seed`.
pub(crate) fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` on every path index, possibly in parallel, and returns the
/// results in index order.
pub(crate) fn run_paths<T, F>(cfg: &SimConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let job = || (0..cfg.n_paths as u64).into_par_iter().map(|i| f(i, &mut path_rng(cfg.seed, i))).collect();
    match cfg.threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CbreError::Simulation(format!("cannot build a pool of {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn require_start(x0: f64) -> Result<()> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(CbreError::Domain(format!("start state must be finite and non-negative, got {x0}")));
    }
    Ok(())
}
