use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{bridge_crossing, Dynamics, Outcome, StepNoise};
use super::{require_start, run_paths, Estimate, HittingTimeEstimate, LaplaceEstimate, SimConfig};
use crate::mechanisms::ModelSpec;
use crate::{CbreError, Result};

/// First exit of one path from `(lower, upper)`.
struct Exit {
    /// Exit time and whether it was through the lower level.
    hit: Option<(f64, bool)>,
    /// `∫_0^{T ∧ t_max} Z_s ds` by the trapezoidal rule.
    integral: f64,
}

/// Runs one path until it leaves `(lower, upper)`. Crossings of a positive
/// level between grid points are detected with the Brownian-bridge
/// probability from the pre-step diffusion coefficient; level 0 is reached
/// only through absorption.
fn exit_path<R: Rng + ?Sized>(dy: &Dynamics, x0: f64, lower: f64, upper: f64, rng: &mut R) -> Exit {
    if x0 <= lower {
        return Exit { hit: Some((0.0, true)), integral: 0.0 };
    }
    if x0 >= upper {
        return Exit { hit: Some((0.0, false)), integral: 0.0 };
    }
    let n = dy.steps();
    let mut z = x0;
    let mut integral = 0.0;
    let mut noise = StepNoise::default();
    for k in 0..n {
        let h = dy.step_len(k);
        let t = if k + 1 == n { dy.res.t_max } else { (k + 1) as f64 * dy.res.dt };
        dy.draw(rng, h, z, &mut noise);
        let next = match dy.advance(z, h, &noise) {
            Outcome::Alive(v) => v,
            Outcome::Absorbed => 0.0,
            Outcome::Exploded(_) => {
                if upper.is_finite() {
                    integral += 0.5 * h * (z + upper);
                    return Exit { hit: Some((t, false)), integral };
                }
                return Exit { hit: None, integral: f64::INFINITY };
            }
        };
        integral += 0.5 * h * (z + next);
        if next <= lower {
            return Exit { hit: Some((t, true)), integral };
        }
        if next >= upper {
            return Exit { hit: Some((t, false)), integral };
        }
        let v = dy.variance(z);
        if lower > 0.0 && rng.random::<f64>() < bridge_crossing(z - lower, next - lower, v, h) {
            return Exit { hit: Some((t, true)), integral };
        }
        if upper.is_finite() && rng.random::<f64>() < bridge_crossing(upper - z, upper - next, v, h) {
            return Exit { hit: Some((t, false)), integral };
        }
        z = next;
    }
    Exit { hit: None, integral }
}

fn check_level(x0: f64, a: f64) -> Result<()> {
    require_start(x0)?;
    if !(a >= 0.0 && a <= x0) {
        return Err(CbreError::Domain(format!("level must satisfy 0 <= a <= x0, got a={a}, x0={x0}")));
    }
    Ok(())
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(CbreError::Domain(format!("λ must be finite and non-negative, got {l}")));
    }
    Ok(())
}

fn run_exits(model: &ModelSpec, x0: f64, lower: f64, upper: f64, cfg: &SimConfig) -> Result<Vec<Exit>> {
    let dy = Dynamics::new(model, cfg.resolve(model, x0)?);
    run_paths(cfg, |_, rng| exit_path(&dy, x0, lower, upper, rng))
}

/// Monte Carlo estimate of `T_a = inf{t: Z_t ≤ a}` from `x0`.
pub fn estimate_hitting(model: &ModelSpec, x0: f64, a: f64, lambdas: &[f64], cfg: &SimConfig) -> Result<HittingTimeEstimate> {
    check_level(x0, a)?;
    check_lambdas(lambdas)?;
    let exits = run_exits(model, x0, a, f64::INFINITY, cfg)?;
    let times: Vec<Option<f64>> = exits.iter().map(|e| e.hit.map(|h| h.0)).collect();
    let t_max = cfg.t_max;
    let n = times.len();
    let hits: Vec<f64> = times.iter().flatten().copied().collect();
    let censored_fraction = (n - hits.len()) as f64 / n as f64;
    let laplace = lambdas
        .iter()
        .map(|&l| LaplaceEstimate {
            lambda: l,
            lower: Estimate::from_samples(times.iter().map(|t| t.map_or(0.0, |t| (-l * t).exp()))),
            upper: Estimate::from_samples(times.iter().map(|t| (-l * t.unwrap_or(t_max)).exp())),
        })
        .collect();
    Ok(HittingTimeEstimate {
        level: a,
        n_paths: n,
        p_hit_by_tmax: Estimate::from_samples(times.iter().map(|t| if t.is_some() { 1.0 } else { 0.0 })),
        mean_t: Estimate::from_samples(times.iter().map(|t| t.unwrap_or(t_max))),
        mean_t_uncensored: (!hits.is_empty()).then(|| Estimate::from_samples(hits.iter().copied())),
        laplace,
        censored_fraction,
        warning: hits.is_empty().then(|| format!("no path reached level {a} within t_max = {t_max}")),
    })
}

/// Exit of `(lower, upper)` from `x0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitEstimate {
    pub lower: f64,
    pub upper: f64,
    pub n_paths: usize,
    /// Probability of leaving through `lower` first.
    pub p_lower: Estimate,
    pub p_upper: Estimate,
    pub censored_fraction: f64,
}

/// Frequencies of leaving `(lower, upper)` through each end.
pub fn estimate_exit(model: &ModelSpec, x0: f64, lower: f64, upper: f64, cfg: &SimConfig) -> Result<ExitEstimate> {
    require_start(x0)?;
    if !(lower >= 0.0 && lower <= x0 && x0 <= upper && upper.is_finite()) {
        return Err(CbreError::Domain(format!("need 0 <= lower <= x0 <= upper < ∞, got {lower}, {x0}, {upper}")));
    }
    let exits = run_exits(model, x0, lower, upper, cfg)?;
    let n = exits.len();
    let censored = exits.iter().filter(|e| e.hit.is_none()).count();
    Ok(ExitEstimate {
        lower,
        upper,
        n_paths: n,
        p_lower: Estimate::from_samples(exits.iter().map(|e| if matches!(e.hit, Some((_, true))) { 1.0 } else { 0.0 })),
        p_upper: Estimate::from_samples(exits.iter().map(|e| if matches!(e.hit, Some((_, false))) { 1.0 } else { 0.0 })),
        censored_fraction: censored as f64 / n as f64,
    })
}

/// `E_x[exp(-λ∫_0^{T_a} Z_s ds)]` with censoring bounds: censored paths
/// count as 0 in `lower` and as `exp(-λ∫_0^{t_max} Z)` in `upper`.
pub fn estimate_path_integral_laplace(model: &ModelSpec, x0: f64, a: f64, lambdas: &[f64], cfg: &SimConfig) -> Result<Vec<LaplaceEstimate>> {
    check_level(x0, a)?;
    check_lambdas(lambdas)?;
    let exits = run_exits(model, x0, a, f64::INFINITY, cfg)?;
    Ok(lambdas
        .iter()
        .map(|&l| {
            let f = |e: &Exit| (-l * e.integral).exp();
            LaplaceEstimate {
                lambda: l,
                lower: Estimate::from_samples(exits.iter().map(|e| if e.hit.is_some() { f(e) } else { 0.0 })),
                upper: Estimate::from_samples(exits.iter().map(f)),
            }
        })
        .collect())
}
