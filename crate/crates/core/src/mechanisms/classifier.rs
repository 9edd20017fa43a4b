use serde::{Deserialize, Serialize};

use super::conditions::{condition_report, ConditionReport};
use super::{DriftClass, EnvironmentReport, Interval, ModelSpec};
use crate::error::{CbreError, Result};

/// Extinction verdicts; `None` (JSON `null`) means no rule applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionReport {
    pub extinct_positive_prob: Option<bool>,
    pub extinct_as: Option<bool>,
    pub finite_uniform_mean: Option<bool>,
    pub comes_down_from_infinity: Option<bool>,
    pub rationale: Vec<String>,
    pub conditions: ConditionReport,
    pub environment: EnvironmentReport,
}

/// Apply the comparison and mean-extinction rules in order.
pub fn extinction_classifier(model: &ModelSpec) -> Result<ExtinctionReport> {
    if !model.first_moment_regime() {
        return Err(CbreError::RegimeMismatch("extinction rules need ∫_[1,∞) zμ(dz) < ∞".into()));
    }
    if !model.competition.is_non_decreasing() {
        return Err(CbreError::RegimeMismatch("extinction rules need a non-decreasing competition map".into()));
    }
    let conditions = condition_report(model);
    let environment = model.environment.report();
    let mut out = ExtinctionReport {
        extinct_positive_prob: None,
        extinct_as: None,
        finite_uniform_mean: None,
        comes_down_from_infinity: None,
        rationale: Vec::new(),
        conditions,
        environment,
    };
    if !out.conditions.grey.holds() {
        out.rationale.push(format!("Grey's condition not established ({:?}); no rule applies", out.conditions.grey.verdict).to_lowercase());
        return Ok(out);
    }
    out.extinct_positive_prob = Some(true);
    out.rationale.push("Grey's condition holds: the competition-free dominating process dies with positive probability".into());
    if matches!(out.environment.drift_class, DriftClass::ToMinusInf | DriftClass::Oscillates) {
        out.extinct_as = Some(true);
        out.rationale.push(format!("K does not drift to +inf (mean of K_1 = {:?}): extinction in finite time a.s.", out.environment.mean_k1));
    }
    if out.conditions.h2_competition.holds() {
        out.extinct_as = Some(true);
        out.finite_uniform_mean = Some(true);
        out.rationale.push("Grey's condition and ∫^∞ dy/g(y) < ∞: sup_x E_x[T_0] < ∞".into());
        let neg_small = model.environment.pi.mass(Interval::open(-1.0, 0.0));
        if neg_small.is_finite() {
            out.comes_down_from_infinity = Some(true);
            out.rationale.push(format!("negative environment jumps have finite activity (π((-1,0)) = {neg_small}): comes down from infinity"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{BranchingMechanism, CompetitionSpec, EnvironmentSpec, LevyMeasure, Side};

    #[test]
    fn feller_logistic_in_brownian_environment() {
        let m = ModelSpec::feller_logistic(0.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let r = extinction_classifier(&m).unwrap();
        assert_eq!(r.extinct_positive_prob, Some(true));
        assert_eq!(r.extinct_as, Some(true));
        assert_eq!(r.comes_down_from_infinity, Some(true));
        assert_eq!(r.environment.drift_class, DriftClass::ToMinusInf);
    }

    #[test]
    fn pure_drift_has_no_verdict() {
        let m = ModelSpec::new(BranchingMechanism::diffusive(-1.0, 0.0).unwrap(), EnvironmentSpec::default(), CompetitionSpec::None).unwrap();
        let r = extinction_classifier(&m).unwrap();
        assert_eq!(r.extinct_positive_prob, None);
        assert_eq!(r.extinct_as, None);
        assert_eq!(r.comes_down_from_infinity, None);
    }

    #[test]
    fn growing_environment_without_competition() {
        let m = ModelSpec::new(BranchingMechanism::diffusive(0.0, 1.0).unwrap(), EnvironmentSpec::brownian(2.0, 1.0).unwrap(), CompetitionSpec::None).unwrap();
        let r = extinction_classifier(&m).unwrap();
        assert_eq!(r.extinct_positive_prob, Some(true));
        assert_eq!(r.extinct_as, None);
    }

    #[test]
    fn infinite_activity_negative_jumps_block_coming_down() {
        let pi = LevyMeasure::power_law(0.5, 1.2, 0.0, Some(0.9), Side::Symmetric).unwrap();
        let m = ModelSpec::new(BranchingMechanism::diffusive(0.0, 1.0).unwrap(), EnvironmentSpec::new(0.0, 0.5, pi).unwrap(), CompetitionSpec::Logistic { c: 1.0 }).unwrap();
        let r = extinction_classifier(&m).unwrap();
        assert_eq!(r.finite_uniform_mean, Some(true));
        assert_eq!(r.comes_down_from_infinity, None);
    }

    #[test]
    fn heavy_branching_tail_is_a_regime_mismatch() {
        let mu = LevyMeasure::power_law(1.0, 0.5, 0.0, None, Side::Positive).unwrap();
        let m = ModelSpec::new(BranchingMechanism::new(0.0, 1.0, mu).unwrap(), EnvironmentSpec::default(), CompetitionSpec::None).unwrap();
        assert!(matches!(extinction_classifier(&m), Err(CbreError::RegimeMismatch(_))));
    }
}
