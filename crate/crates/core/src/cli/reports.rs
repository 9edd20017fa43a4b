//! Report documents produced by the commands. Everything here is a pure
//! function of its inputs, so the JSON forms are reproducible.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{AnalyticsSpec, SCHEMA_VERSION};
use crate::diffusion_scale::{classify_diffusion, laplace_ta_diffusion, DiffusionClassification, DiffusionModel};
use crate::logistic_analytics::{f_lambda_and_duhalde, laplace_ta_logistic, mean_t0, subordinator_classify, LogisticModel, SubordinatorRegime, SubordinatorReport};
use crate::mechanisms::{bound_constants, extinction_classifier, BoundConstants, ExtinctionReport, ModelSpec};
use crate::simulate::{estimate_hitting, HittingTimeEstimate, SimConfig};
use crate::Result;

/// A computed value or the reason it could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Computed<T> {
    Value(T),
    Error(String),
}

impl<T> Computed<T> {
    fn of(r: Result<T>) -> Self {
        match r {
            Ok(v) => Self::Value(v),
            Err(e) => Self::Error(e.to_string()),
        }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Self::Value(v) => Some(v),
            Self::Error(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub extinction: Computed<ExtinctionReport>,
    /// Present for jump-free models with `γ > 0`.
    pub diffusion: Option<Computed<DiffusionClassification>>,
    /// Present for logistic subordinator models with `σ > 0`.
    pub subordinator: Option<Computed<SubordinatorReport>>,
    pub bounds: Computed<BoundConstants>,
    /// Every applicable verdict was reached. For subordinators the
    /// extinction question is settled by the subordinator regime when the
    /// comparison rules are silent.
    pub decided: bool,
}

pub fn classify(model: &ModelSpec) -> ClassifyReport {
    let extinction = Computed::of(extinction_classifier(model));
    let br = &model.branching;
    let env = &model.environment;
    let jump_free = !br.has_jumps() && env.pi.is_empty() && br.gamma > 0.0;
    let diffusion = jump_free.then(|| Computed::of(DiffusionModel::from_model(model).and_then(|d| classify_diffusion(&d))));
    let logistic = LogisticModel::from_model(model).ok();
    let subordinator = logistic
        .filter(|l| l.branching().is_subordinator && l.sigma() > 0.0)
        .map(|l| Computed::of(subordinator_classify(&l)));
    let bounds = Computed::of(bound_constants(model));
    let sub_decided = subordinator.as_ref().is_some_and(|s| s.value().is_some_and(|s| s.regime != SubordinatorRegime::Undecided));
    let decided = (extinction.value().is_some_and(|e| e.extinct_as.is_some()) || sub_decided)
        && diffusion.as_ref().is_none_or(|d| d.value().is_some())
        && subordinator.as_ref().is_none_or(|s| s.value().is_some_and(|s| s.regime != SubordinatorRegime::Undecided));
    ClassifyReport { schema_version: SCHEMA_VERSION, model: model.clone(), extinction, diffusion, subordinator, bounds, decided }
}

/// Monte Carlo estimates for one start point and level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationEntry {
    pub x0: f64,
    pub level: f64,
    pub hitting: HittingTimeEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub simulation: SimConfig,
    pub lambdas: Vec<f64>,
    /// Empty when `t_max = 0`; levels above the start point are skipped.
    pub estimates: Vec<SimulationEntry>,
}

pub fn simulate_summary(model: &ModelSpec, sim: &SimConfig, points: &AnalyticsSpec) -> Result<SimulationSummary> {
    sim.validate()?;
    let mut estimates = Vec::new();
    if sim.t_max > 0.0 {
        for &x0 in &points.x0s {
            for &level in points.levels.iter().filter(|&&a| a <= x0) {
                estimates.push(SimulationEntry { x0, level, hitting: estimate_hitting(model, x0, level, &points.lambdas, sim)? });
            }
        }
    }
    Ok(SimulationSummary { schema_version: SCHEMA_VERSION, model: model.clone(), simulation: sim.clone(), lambdas: points.lambdas.clone(), estimates })
}

fn num(v: f64) -> String {
    if v.is_finite() { format!("{v:.17e}") } else { v.to_string() }
}

impl SimulationSummary {
    /// Long format: `x0,level,lambda,quantity,value,stderr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x0,level,lambda,quantity,value,stderr\n");
        for e in &self.estimates {
            let h = &e.hitting;
            let mut row = |l: Option<f64>, q: &str, v: f64, se: f64| {
                let l = l.map_or(String::new(), num);
                let _ = writeln!(s, "{},{},{l},{q},{},{}", num(e.x0), num(e.level), num(v), num(se));
            };
            row(None, "p_hit_by_tmax", h.p_hit_by_tmax.value, h.p_hit_by_tmax.stderr);
            row(None, "mean_t", h.mean_t.value, h.mean_t.stderr);
            if let Some(u) = h.mean_t_uncensored {
                row(None, "mean_t_uncensored", u.value, u.stderr);
            }
            row(None, "censored_fraction", h.censored_fraction, 0.0);
            for l in &h.laplace {
                row(Some(l.lambda), "laplace_lower", l.lower.value, l.lower.stderr);
                row(Some(l.lambda), "laplace_upper", l.upper.value, l.upper.stderr);
            }
        }
        s
    }
}

/// One analytic quantity at one point, by one route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsEntry {
    pub quantity: String,
    pub route: String,
    pub x0: Option<f64>,
    pub level: Option<f64>,
    pub lambda: Option<f64>,
    pub result: Computed<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub entries: Vec<AnalyticsEntry>,
}

pub fn analytics(model: &ModelSpec, points: &AnalyticsSpec) -> AnalyticsReport {
    let mut entries = Vec::new();
    let mut push = |quantity: &str, route: &str, x0, level, lambda, r: Result<f64>| {
        entries.push(AnalyticsEntry { quantity: quantity.into(), route: route.into(), x0, level, lambda, result: Computed::of(r) });
    };
    let pairs: Vec<(f64, f64)> = points.x0s.iter().flat_map(|&x| points.levels.iter().filter(move |&&a| a <= x).map(move |&a| (x, a))).collect();
    let br = &model.branching;
    let env = &model.environment;
    if !br.has_jumps() && env.pi.is_empty() && br.gamma > 0.0 {
        match DiffusionModel::from_model(model) {
            Ok(d) => {
                for &x in &points.x0s {
                    push("scale", "diffusion", Some(x), None, None, d.scale_s(x));
                    push("p_to_infinity", "diffusion", Some(x), None, None, d.p_to_infinity(x));
                }
                for &(x, a) in &pairs {
                    for &l in &points.lambdas {
                        push("laplace_hitting_time", "diffusion", Some(x), Some(a), Some(l), laplace_ta_diffusion(&d, x, a, l));
                    }
                }
            }
            Err(e) => push("scale", "diffusion", None, None, None, Err(e)),
        }
    }
    if let Ok(lm) = LogisticModel::from_model(model) {
        for &l in &points.lambdas {
            push("m", "logistic", None, None, Some(l), lm.m(l));
        }
        if lm.branching().is_subordinator {
            for &(x, a) in &pairs {
                for &l in &points.lambdas {
                    push("laplace_path_integral", "subordinator", Some(x), Some(a), Some(l), f_lambda_and_duhalde(&lm, x, a, l, None).map(|r| r.ratio));
                }
            }
        } else {
            for &x in &points.x0s {
                push("mean_extinction_time", "logistic", Some(x), Some(0.0), None, mean_t0(&lm, x));
            }
            for &(x, a) in &pairs {
                for &l in &points.lambdas {
                    push("laplace_hitting_time", "logistic", Some(x), Some(a), Some(l), laplace_ta_logistic(&lm, x, a, l));
                }
            }
        }
    }
    AnalyticsReport { schema_version: SCHEMA_VERSION, model: model.clone(), entries }
}

impl AnalyticsReport {
    /// `quantity,route,x0,level,lambda,value,error`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,route,x0,level,lambda,value,error\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), num);
        for e in &self.entries {
            let (v, err) = match &e.result {
                Computed::Value(v) => (num(*v), String::new()),
                Computed::Error(m) => (String::new(), format!("\"{}\"", m.replace('"', "\"\""))),
            };
            let _ = writeln!(s, "{},{},{},{},{},{v},{err}", e.quantity, e.route, opt(e.x0), opt(e.level), opt(e.lambda));
        }
        s
    }

    /// True when at least one entry was computed.
    pub fn any_value(&self) -> bool {
        self.entries.iter().any(|e| e.result.value().is_some())
    }
}
