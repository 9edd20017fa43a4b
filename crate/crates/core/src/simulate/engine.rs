//! One Euler step of the branching SDE, split into noise drawing and state
//! update so several coupled states can share the same noise.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::Resolved;
use crate::mechanisms::{CompetitionSpec, Interval, JumpSampler, ModelSpec};

/// Noise for one step. Branching marks are points `(u, z)` of the Poisson
/// measure `ds μ(dz) du` restricted to `u ≤ level`; a state `Z` takes the
/// marks with `u < Z`, which nests the smaller state's jumps inside the
/// larger's.
#[derive(Default)]
pub(crate) struct StepNoise {
    pub n_b: f64,
    pub n_e: f64,
    pub marks: Vec<(f64, f64)>,
    /// Sum of environment jump sizes; applied as `Z ↦ Z e^{sum}`.
    pub env_log: f64,
}

pub(crate) struct Dynamics {
    /// `b + d` minus the small-jump compensators, per unit state.
    lin: f64,
    two_gamma2: f64,
    sigma: f64,
    mu: JumpSampler,
    pi: JumpSampler,
    competition: CompetitionSpec,
    pub res: Resolved,
}

pub(crate) enum Outcome {
    Alive(f64),
    Absorbed,
    Exploded(f64),
}

impl Dynamics {
    pub fn new(model: &ModelSpec, res: Resolved) -> Self {
        let br = &model.branching;
        let env = &model.environment;
        let eps = res.eps;
        let comp_mu = if br.mu.is_empty() || eps >= 1.0 { 0.0 } else { br.mu.moment(1.0, Interval::open(eps, 1.0)) };
        let comp_pi = if env.pi.is_empty() || eps >= 1.0 {
            0.0
        } else {
            let f = |z: f64| z.exp_m1();
            env.pi.integrate(f, Interval::open(-1.0, -eps)).value + env.pi.integrate(f, Interval::open(eps, 1.0)).value
        };
        Self {
            lin: br.b + env.d - comp_mu - comp_pi,
            two_gamma2: 2.0 * br.gamma * br.gamma,
            sigma: env.sigma,
            mu: br.mu.sampler(eps, true),
            pi: env.pi.sampler(eps, false),
            competition: model.competition.clone(),
            res,
        }
    }

    /// Draws the noise of a step of length `h` for states up to `level`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, h: f64, level: f64, out: &mut StepNoise) {
        out.n_b = if self.two_gamma2 > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        out.n_e = if self.sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        out.marks.clear();
        let rate_b = self.mu.rate * level * h;
        if rate_b > 0.0 {
            for _ in 0..poisson(rng, rate_b) {
                let u = level * rng.random::<f64>();
                out.marks.push((u, self.mu.sample(rng)));
            }
        }
        out.env_log = 0.0;
        let rate_e = self.pi.rate * h;
        if rate_e > 0.0 {
            for _ in 0..poisson(rng, rate_e) {
                out.env_log += self.pi.sample(rng);
            }
        }
    }

    /// Advances `z` over a step of length `h` with the given noise.
    pub fn advance(&self, z: f64, h: f64, noise: &StepNoise) -> Outcome {
        if z <= 0.0 {
            return Outcome::Absorbed;
        }
        let mut next = z + (self.lin * z - self.competition.g(z)) * h
            + (self.two_gamma2 * z * h).sqrt() * noise.n_b
            + self.sigma * z * h.sqrt() * noise.n_e;
        for &(u, jump) in &noise.marks {
            if u < z {
                next += jump;
            }
        }
        if noise.env_log != 0.0 {
            next *= noise.env_log.exp();
        }
        self.classify(next)
    }

    pub fn classify(&self, next: f64) -> Outcome {
        if next.is_nan() {
            return Outcome::Exploded(next);
        }
        if next <= self.res.floor {
            return Outcome::Absorbed;
        }
        if next > self.res.ceiling {
            return Outcome::Exploded(next);
        }
        Outcome::Alive(next)
    }

    /// Local diffusion variance rate `2γ²z + σ²z²`, for bridge corrections.
    pub fn variance(&self, z: f64) -> f64 {
        self.two_gamma2 * z + self.sigma * self.sigma * z * z
    }

    /// Step count and the length of step `k` on `[0, t_max]`.
    pub fn steps(&self) -> usize {
        (self.res.t_max / self.res.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn step_len(&self, k: usize) -> f64 {
        (self.res.t_max - k as f64 * self.res.dt).min(self.res.dt)
    }
}

pub(crate) fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Probability that a Brownian bridge with variance rate `v` over a step of
/// length `h` crossed a level at distances `d0, d1 > 0` from its ends.
pub(crate) fn bridge_crossing(d0: f64, d1: f64, v: f64, h: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    (-2.0 * d0 * d1 / (v * h)).exp()
}
