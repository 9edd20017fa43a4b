use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{Dynamics, Outcome, StepNoise};
use super::{path_rng, require_start, run_paths, PathSample, SimConfig};
use crate::mechanisms::ModelSpec;
use crate::{CbreError, Result};

fn record(times: &mut Vec<f64>, values: &mut Vec<f64>, t: f64, v: f64) {
    times.push(t);
    values.push(v);
}

/// Euler path from `x0` on `[0, t_max]`.
fn run<R: Rng + ?Sized>(dy: &Dynamics, x0: f64, stride: usize, rng: &mut R) -> PathSample {
    let mut p = PathSample { times: vec![0.0], values: vec![x0], absorbed_at: None, exploded: false };
    if x0 <= 0.0 {
        p.absorbed_at = Some(0.0);
        if dy.res.t_max > 0.0 {
            record(&mut p.times, &mut p.values, dy.res.t_max, 0.0);
        }
        return p;
    }
    let n = dy.steps();
    let mut z = x0;
    let mut noise = StepNoise::default();
    for k in 0..n {
        let h = dy.step_len(k);
        dy.draw(rng, h, z, &mut noise);
        let t = if k + 1 == n { dy.res.t_max } else { (k + 1) as f64 * dy.res.dt };
        match dy.advance(z, h, &noise) {
            Outcome::Alive(v) => {
                z = v;
                if (k + 1) % stride == 0 || k + 1 == n {
                    record(&mut p.times, &mut p.values, t, z);
                }
            }
            Outcome::Absorbed => {
                record(&mut p.times, &mut p.values, t, 0.0);
                p.absorbed_at = Some(t);
                if t < dy.res.t_max {
                    record(&mut p.times, &mut p.values, dy.res.t_max, 0.0);
                }
                return p;
            }
            Outcome::Exploded(v) => {
                record(&mut p.times, &mut p.values, t, if v.is_nan() { f64::INFINITY } else { v });
                p.exploded = true;
                return p;
            }
        }
    }
    p
}

/// One path (stream 0 of `cfg.seed`).
pub fn simulate_path(model: &ModelSpec, x0: f64, cfg: &SimConfig) -> Result<PathSample> {
    require_start(x0)?;
    let dy = Dynamics::new(model, cfg.resolve(model, x0)?);
    Ok(run(&dy, x0, cfg.record_stride, &mut path_rng(cfg.seed, 0)))
}

/// `cfg.n_paths` independent paths in path order.
pub fn simulate_paths(model: &ModelSpec, x0: f64, cfg: &SimConfig) -> Result<Vec<PathSample>> {
    require_start(x0)?;
    let dy = Dynamics::new(model, cfg.resolve(model, x0)?);
    run_paths(cfg, |_, rng| run(&dy, x0, cfg.record_stride, rng))
}

/// Paths from several starts driven by the same noise. Branching marks are
/// drawn up to the largest live state and each path keeps those below its
/// own state. The absorption floor is resolved from the smallest start.
fn run_coupled<R: Rng + ?Sized>(dy: &Dynamics, starts: &[f64], stride: usize, rng: &mut R) -> Vec<PathSample> {
    let mut paths: Vec<PathSample> =
        starts.iter().map(|&x| PathSample { times: vec![0.0], values: vec![x], absorbed_at: (x <= 0.0).then_some(0.0), exploded: false }).collect();
    let mut z: Vec<f64> = starts.to_vec();
    let mut done: Vec<bool> = starts.iter().map(|&x| x <= 0.0).collect();
    let n = dy.steps();
    let mut noise = StepNoise::default();
    for k in 0..n {
        if done.iter().all(|&d| d) {
            break;
        }
        let h = dy.step_len(k);
        let level = z.iter().zip(&done).filter(|(_, &d)| !d).map(|(&v, _)| v).fold(0.0, f64::max);
        dy.draw(rng, h, level, &mut noise);
        let t = if k + 1 == n { dy.res.t_max } else { (k + 1) as f64 * dy.res.dt };
        let keep = (k + 1) % stride == 0 || k + 1 == n;
        for i in 0..z.len() {
            let p = &mut paths[i];
            if done[i] {
                if keep && p.absorbed_at.is_some() {
                    record(&mut p.times, &mut p.values, t, 0.0);
                }
                continue;
            }
            match dy.advance(z[i], h, &noise) {
                Outcome::Alive(v) => {
                    z[i] = v;
                    if keep {
                        record(&mut p.times, &mut p.values, t, v);
                    }
                }
                Outcome::Absorbed => {
                    z[i] = 0.0;
                    done[i] = true;
                    p.absorbed_at = Some(t);
                    record(&mut p.times, &mut p.values, t, 0.0);
                }
                Outcome::Exploded(v) => {
                    done[i] = true;
                    p.exploded = true;
                    record(&mut p.times, &mut p.values, t, if v.is_nan() { f64::INFINITY } else { v });
                }
            }
        }
    }
    paths
}

/// Shared-noise paths from every start in `starts` (stream 0).
pub fn coupled_paths(model: &ModelSpec, starts: &[f64], cfg: &SimConfig) -> Result<Vec<PathSample>> {
    let dy = Dynamics::new_for(model, starts, cfg)?;
    Ok(run_coupled(&dy, starts, cfg.record_stride, &mut path_rng(cfg.seed, 0)))
}

impl Dynamics {
    fn new_for(model: &ModelSpec, starts: &[f64], cfg: &SimConfig) -> Result<Self> {
        if starts.is_empty() {
            return Err(CbreError::Domain("coupling needs at least one start".into()));
        }
        for &x in starts {
            require_start(x)?;
        }
        let low = starts.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        Ok(Dynamics::new(model, cfg.resolve(model, if low.is_finite() { low } else { 0.0 })?))
    }
}

/// Largest amount by which `lower` exceeds `upper` on their common grid.
pub fn ordering_violation(lower: &PathSample, upper: &PathSample) -> f64 {
    lower.values.iter().zip(&upper.values).map(|(a, b)| a - b).fold(0.0, f64::max)
}

/// Shared-noise pair with `x0 ≤ y0`. Errors when the ordering breaks by
/// more than `dt^{1/2}` at some grid time, which signals a scheme bug.
pub fn coupled_pair(model: &ModelSpec, x0: f64, y0: f64, cfg: &SimConfig) -> Result<(PathSample, PathSample)> {
    if !(x0 <= y0) {
        return Err(CbreError::Domain(format!("coupled_pair needs x0 <= y0, got {x0} > {y0}")));
    }
    let mut v = coupled_paths(model, &[x0, y0], cfg)?;
    let (b, a) = (v.pop().unwrap(), v.pop().unwrap());
    let worst = ordering_violation(&a, &b);
    if worst > cfg.dt.sqrt() {
        return Err(CbreError::Simulation(format!("coupling order broken by {worst:e} > dt^(1/2)")));
    }
    Ok((a, b))
}

/// Ordering statistics over `cfg.n_paths` coupled pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub n_pairs: usize,
    pub grid_points: usize,
    /// Grid points where the lower path is strictly above the upper one.
    pub strict_violations: usize,
    /// Grid points where it is above by more than `dt^{1/2}`.
    pub violations_beyond_tolerance: usize,
    pub max_violation: f64,
}

/// Runs `cfg.n_paths` shared-noise pairs from `x0 ≤ y0` (or from the same
/// start under two models when `upper_model` is given) and counts ordering
/// violations at every grid time.
pub fn coupling_check(model: &ModelSpec, upper_model: Option<&ModelSpec>, x0: f64, y0: f64, cfg: &SimConfig) -> Result<CouplingReport> {
    if !(x0 <= y0) {
        return Err(CbreError::Domain(format!("coupling needs x0 <= y0, got {x0} > {y0}")));
    }
    let tol = cfg.dt.sqrt();
    let per_pair = match upper_model {
        None => {
            let dy = Dynamics::new_for(model, &[x0, y0], cfg)?;
            run_paths(cfg, |_, rng| {
                let v = run_coupled(&dy, &[x0, y0], cfg.record_stride, rng);
                count(&v[0], &v[1], tol)
            })?
        }
        Some(up) => {
            let lo = Dynamics::new_for(model, &[x0], cfg)?;
            let hi = Dynamics::new_for(up, &[y0], cfg)?;
            run_paths(cfg, |_, rng| {
                let (a, b) = run_two_models(&lo, &hi, x0, y0, cfg.record_stride, rng);
                count(&a, &b, tol)
            })?
        }
    };
    let mut rep = CouplingReport { n_pairs: per_pair.len(), grid_points: 0, strict_violations: 0, violations_beyond_tolerance: 0, max_violation: 0.0 };
    for (g, s, b, m) in per_pair {
        rep.grid_points += g;
        rep.strict_violations += s;
        rep.violations_beyond_tolerance += b;
        rep.max_violation = rep.max_violation.max(m);
    }
    Ok(rep)
}

fn count(a: &PathSample, b: &PathSample, tol: f64) -> (usize, usize, usize, f64) {
    let n = a.values.len().min(b.values.len());
    let mut strict = 0;
    let mut beyond = 0;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let d = a.values[i] - b.values[i];
        if d > 0.0 {
            strict += 1;
            worst = worst.max(d);
            if d > tol {
                beyond += 1;
            }
        }
    }
    (n, strict, beyond, worst)
}

/// Two models driven by the same noise; used to compare competition maps.
fn run_two_models<R: Rng + ?Sized>(lo: &Dynamics, hi: &Dynamics, x0: f64, y0: f64, stride: usize, rng: &mut R) -> (PathSample, PathSample) {
    let mut out = [
        PathSample { times: vec![0.0], values: vec![x0], absorbed_at: None, exploded: false },
        PathSample { times: vec![0.0], values: vec![y0], absorbed_at: None, exploded: false },
    ];
    let mut z = [x0, y0];
    let mut done = [x0 <= 0.0, y0 <= 0.0];
    let n = lo.steps();
    let mut noise = StepNoise::default();
    for k in 0..n {
        let h = lo.step_len(k);
        let level = (0..2).filter(|&i| !done[i]).map(|i| z[i]).fold(0.0, f64::max);
        lo.draw(rng, h, level, &mut noise);
        let t = if k + 1 == n { lo.res.t_max } else { (k + 1) as f64 * lo.res.dt };
        let keep = (k + 1) % stride == 0 || k + 1 == n;
        for (i, dy) in [lo, hi].into_iter().enumerate() {
            let v = if done[i] {
                z[i]
            } else {
                match dy.advance(z[i], h, &noise) {
                    Outcome::Alive(v) => v,
                    Outcome::Absorbed => {
                        done[i] = true;
                        out[i].absorbed_at = Some(t);
                        0.0
                    }
                    Outcome::Exploded(v) => {
                        done[i] = true;
                        out[i].exploded = true;
                        v
                    }
                }
            };
            z[i] = v;
            if keep {
                record(&mut out[i].times, &mut out[i].values, t, v);
            }
        }
    }
    let [a, b] = out;
    (a, b)
}

/// Pooled occupation samples: every `record_stride`-th grid value after
/// `burn_in` from each of `cfg.n_paths` paths, in path order.
pub fn occupation_samples(model: &ModelSpec, x0: f64, burn_in: f64, cfg: &SimConfig) -> Result<Vec<f64>> {
    if !(burn_in >= 0.0 && burn_in < cfg.t_max) {
        return Err(CbreError::Domain(format!("burn-in must lie in [0, t_max), got {burn_in}")));
    }
    let paths = simulate_paths(model, x0, cfg)?;
    Ok(paths
        .iter()
        .flat_map(|p| {
            let tail: Vec<f64> = p.times.iter().zip(&p.values).filter(|(&t, _)| t > burn_in).map(|(_, &v)| v).collect();
            tail
        })
        .collect())
}

