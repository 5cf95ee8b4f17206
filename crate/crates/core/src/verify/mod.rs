//! Reproducible experiments. Each returns an [`ExperimentReport`] whose
//! verdict is recomputable from the serialized table alone.

use serde::{Deserialize, Serialize};

pub mod bilinear;
pub mod bmo;
pub mod duality;
pub mod norms;
pub mod specs;

pub use bilinear::{
    ball_independence_check, truncation_convergence_check, BallIndependenceConfig, BallPair, TruncationConfig,
};
pub use bmo::{bmo_necessity_experiment, BmoConfig, BmoFamily};
pub use duality::{
    bfs_axiom_check, characteristic_condition, chi_duality_check, fefferman_stein_check, holder_check,
    profile_class_check, AxiomConfig, CharacteristicConfig, ChiDualityConfig, ConditionForm, FeffermanSteinConfig,
    HolderConfig, ProfileClassConfig,
};
pub use norms::{averaging_equivalence_check, operator_norm_estimate, EquivalenceConfig, NormSpec, OperatorConfig, OperatorSpec};
pub use specs::*;

/// f64 fields that may hold ±inf or NaN; JSON has no literal for them, so
/// they travel as strings.
mod lenient {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

mod lenient_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::lenient::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::lenient")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// Relative tolerance of identity-type checks.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Relative tolerance of quadrature-limited checks at the default spacing.
pub const QUADRATURE_TOL: f64 = 1e-3;
/// Allowed relative change of a headline under refinement or enlargement.
pub const STABILITY: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub input: String,
    #[serde(with = "lenient")]
    pub measured: f64,
    #[serde(with = "lenient")]
    pub bound: f64,
    #[serde(with = "lenient")]
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    #[serde(with = "lenient")]
    pub h: f64,
    #[serde(with = "lenient")]
    pub headline: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// A named scalar compared against a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "lenient")]
    pub value: f64,
    #[serde(with = "lenient")]
    pub threshold: f64,
    pub comparison: Comparison,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, comparison: Comparison::AtMost }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, comparison: Comparison::AtLeast }
    }

    /// A boolean condition stored as 1 ≥ 1 or 0 ≥ 1.
    pub fn flag(name: &str, holds: bool) -> Self {
        Self::at_least(name, if holds { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn holds(&self) -> bool {
        match self.comparison {
            Comparison::AtMost => self.value <= self.threshold,
            Comparison::AtLeast => self.value >= self.threshold,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub experiment: String,
    #[serde(default)]
    pub paper_anchor: String,
    pub config: serde_json::Value,
    pub rows: Vec<SampleRow>,
    /// Every row ratio must stay at or below this, when set.
    #[serde(with = "lenient_opt")]
    pub row_threshold: Option<f64>,
    #[serde(with = "lenient")]
    pub headline: f64,
    pub ladder: Vec<LadderStep>,
    /// Ladder headlines at or below this count as converged to zero.
    #[serde(with = "lenient")]
    pub ladder_floor: f64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
    /// Excluded from determinism comparisons.
    pub timing: Timing,
}

/// The verdict logic, a function of the table only.
pub fn decide(
    rows: &[SampleRow],
    row_threshold: Option<f64>,
    ladder: &[LadderStep],
    ladder_floor: f64,
    checks: &[Check],
) -> Verdict {
    if rows.is_empty() && checks.is_empty() {
        return Verdict::Inconclusive;
    }
    if let Some(t) = row_threshold {
        if rows.iter().any(|r| !(r.ratio <= t)) {
            return Verdict::Fail;
        }
    }
    if ladder.len() >= 2 {
        let first = ladder[0].headline;
        let last = ladder[ladder.len() - 1].headline;
        let steady = last <= first * (1.0 + STABILITY) || last <= ladder_floor;
        if !steady {
            return Verdict::Fail;
        }
    }
    if checks.iter().all(Check::holds) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl ExperimentReport {
    pub fn new(id: &str, experiment: &str, config: serde_json::Value) -> Self {
        Self {
            id: id.into(),
            experiment: experiment.into(),
            paper_anchor: String::new(),
            config,
            rows: Vec::new(),
            row_threshold: None,
            headline: f64::NAN,
            ladder: Vec::new(),
            ladder_floor: 0.0,
            checks: Vec::new(),
            notes: Vec::new(),
            verdict: Verdict::Inconclusive,
            timing: Timing::default(),
        }
    }

    pub fn row(&mut self, input: impl Into<String>, measured: f64, bound: f64) {
        let ratio = measured / bound;
        self.rows.push(SampleRow { input: input.into(), measured, bound, ratio });
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn step(&mut self, h: f64, headline: f64) {
        self.ladder.push(LadderStep { h, headline });
    }

    pub fn recompute_verdict(&self) -> Verdict {
        decide(&self.rows, self.row_threshold, &self.ladder, self.ladder_floor, &self.checks)
    }

    /// Sets the verdict from the table and returns the report.
    pub fn finish(mut self) -> Self {
        self.verdict = self.recompute_verdict();
        self
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.holds()).collect()
    }

    /// Rows as CSV with a header line.
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("input,measured,bound,ratio\n");
        for r in &self.rows {
            s.push_str(&format!("\"{}\",{:e},{:e},{:e}\n", r.input.replace('"', "'"), r.measured, r.bound, r.ratio));
        }
        s
    }
}

pub(crate) fn max_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::INFINITY, f64::min)
}

/// Relative change |b − a|/|a|; infinite when either side is not finite.
pub(crate) fn drift(a: f64, b: f64) -> f64 {
    if !(a.is_finite() && b.is_finite()) {
        f64::INFINITY
    } else if a == b {
        0.0
    } else {
        (b - a).abs() / a.abs()
    }
}

/// The grid at spacing h and h/2.
pub(crate) fn resolution_pair(grid: &crate::geometry::Grid) -> [crate::geometry::Grid; 2] {
    [grid.clone(), grid.refined()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_is_recomputable_from_serialized_table() {
        let mut r = ExperimentReport::new("x", "holder_check", serde_json::json!({}));
        r.row("a", 0.5, 1.0);
        r.row_threshold = Some(1.0);
        r.step(0.1, 1.0);
        r.step(0.05, 1.05);
        r.check(Check::at_most("c", 0.2, 0.3));
        r.check(Check::at_most("inf", f64::INFINITY, f64::INFINITY));
        let r = r.finish();
        assert_eq!(r.verdict, Verdict::Pass);
        let back: ExperimentReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back.recompute_verdict(), r.verdict);
    }

    #[test]
    fn growing_ladder_fails() {
        let mut r = ExperimentReport::new("x", "t", serde_json::json!({}));
        r.row("a", 1.0, 1.0);
        r.step(0.1, 1.0);
        r.step(0.05, 1.2);
        assert_eq!(r.finish().verdict, Verdict::Fail);
    }

    #[test]
    fn empty_table_is_inconclusive() {
        let r = ExperimentReport::new("x", "t", serde_json::json!({}));
        assert_eq!(r.finish().verdict, Verdict::Inconclusive);
    }
}
