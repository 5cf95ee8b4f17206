//! Experiment type tags and their typed parameter sets.

use anyhow::{anyhow, bail, Result};
use morrey_core::operators::LinearKernel;
use morrey_core::verify::{self, ExperimentReport, GridSpec, KernelSpec, SpaceSpec};
use serde::de::DeserializeOwned;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JobKind {
    HolderCheck,
    ChiDualityCheck,
    CharacteristicCondition,
    ProfileClassCheck,
    BallIndependenceCheck,
    OperatorNormEstimate,
    AveragingEquivalenceCheck,
    BmoNecessityExperiment,
    TruncationConvergenceCheck,
    FeffermanSteinCheck,
    BfsAxiomCheck,
}

impl JobKind {
    pub const ALL: [JobKind; 11] = [
        JobKind::HolderCheck,
        JobKind::ChiDualityCheck,
        JobKind::CharacteristicCondition,
        JobKind::ProfileClassCheck,
        JobKind::BallIndependenceCheck,
        JobKind::OperatorNormEstimate,
        JobKind::AveragingEquivalenceCheck,
        JobKind::BmoNecessityExperiment,
        JobKind::TruncationConvergenceCheck,
        JobKind::FeffermanSteinCheck,
        JobKind::BfsAxiomCheck,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            JobKind::HolderCheck => "holder_check",
            JobKind::ChiDualityCheck => "chi_duality_check",
            JobKind::CharacteristicCondition => "characteristic_condition",
            JobKind::ProfileClassCheck => "profile_class_check",
            JobKind::BallIndependenceCheck => "ball_independence_check",
            JobKind::OperatorNormEstimate => "operator_norm_estimate",
            JobKind::AveragingEquivalenceCheck => "averaging_equivalence_check",
            JobKind::BmoNecessityExperiment => "bmo_necessity_experiment",
            JobKind::TruncationConvergenceCheck => "truncation_convergence_check",
            JobKind::FeffermanSteinCheck => "fefferman_stein_check",
            JobKind::BfsAxiomCheck => "bfs_axiom_check",
        }
    }
}

impl std::str::FromStr for JobKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        JobKind::ALL.iter().copied().find(|k| k.tag() == s).ok_or_else(|| {
            let known: Vec<&str> = JobKind::ALL.iter().map(|k| k.tag()).collect();
            format!("unknown experiment type `{s}`; expected one of {}", known.join(", "))
        })
    }
}

#[derive(Clone, Debug)]
pub enum Job {
    Holder(verify::HolderConfig),
    ChiDuality(verify::ChiDualityConfig),
    Characteristic(verify::CharacteristicConfig),
    ProfileClass(verify::ProfileClassConfig),
    BallIndependence(verify::BallIndependenceConfig),
    OperatorNorm(verify::OperatorConfig),
    Equivalence(verify::EquivalenceConfig),
    Bmo(verify::BmoConfig),
    Truncation(verify::TruncationConfig),
    FeffermanStein(verify::FeffermanSteinConfig),
    Axioms(verify::AxiomConfig),
}

fn typed<T: DeserializeOwned>(params: &Value) -> Result<T> {
    serde_json::from_value(params.clone()).map_err(|e| anyhow!("invalid parameters: {e}"))
}

impl Job {
    pub fn from_params(kind: JobKind, params: &Value) -> Result<Self> {
        Ok(match kind {
            JobKind::HolderCheck => Job::Holder(typed(params)?),
            JobKind::ChiDualityCheck => Job::ChiDuality(typed(params)?),
            JobKind::CharacteristicCondition => Job::Characteristic(typed(params)?),
            JobKind::ProfileClassCheck => Job::ProfileClass(typed(params)?),
            JobKind::BallIndependenceCheck => Job::BallIndependence(typed(params)?),
            JobKind::OperatorNormEstimate => Job::OperatorNorm(typed(params)?),
            JobKind::AveragingEquivalenceCheck => Job::Equivalence(typed(params)?),
            JobKind::BmoNecessityExperiment => Job::Bmo(typed(params)?),
            JobKind::TruncationConvergenceCheck => Job::Truncation(typed(params)?),
            JobKind::FeffermanSteinCheck => Job::FeffermanStein(typed(params)?),
            JobKind::BfsAxiomCheck => Job::Axioms(typed(params)?),
        })
    }

    fn grid(&self) -> Option<&GridSpec> {
        Some(match self {
            Job::Holder(c) => &c.grid,
            Job::ChiDuality(c) => &c.grid,
            Job::Characteristic(c) => &c.grid,
            Job::ProfileClass(c) => &c.grid,
            Job::BallIndependence(c) => &c.grid,
            Job::OperatorNorm(c) => &c.grid,
            Job::Equivalence(c) => &c.grid,
            Job::Bmo(_) => return None,
            Job::Truncation(c) => &c.grid,
            Job::FeffermanStein(c) => &c.grid,
            Job::Axioms(c) => &c.grid,
        })
    }

    fn kernels(&self) -> Vec<&KernelSpec> {
        use verify::OperatorSpec as O;
        match self {
            Job::BallIndependence(c) => vec![&c.kernel],
            Job::Truncation(c) => vec![&c.kernel],
            Job::Bmo(c) => vec![&c.kernel],
            Job::OperatorNorm(c) => match &c.op {
                O::Truncated { kernel, .. } | O::Extended { kernel, .. } | O::Commutator { kernel, .. } => vec![kernel],
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    /// Range checks that need built objects: kernels, spaces and the grid.
    pub fn validate(&self) -> Result<()> {
        let grid = match self.grid() {
            Some(g) => Some(g.build().map_err(|e| anyhow!("grid: {e}"))?),
            None => None,
        };
        let dim = grid.as_ref().map_or(1, |g| g.dim());
        for k in self.kernels() {
            k.build(dim).map_err(|e| anyhow!("kernel {}: {e} ({})", kernel_name(k), kernel_constraint(k)))?;
        }
        match self {
            Job::OperatorNorm(c) => {
                use verify::OperatorSpec as O;
                match &c.op {
                    O::Fractional { alpha } => {
                        KernelSpec::Fractional { alpha: *alpha }
                            .build(dim)
                            .map_err(|e| anyhow!("{e} (admissible orders of the bilinear fractional integral)"))?;
                    }
                    O::Averaging { alpha, .. } if !(0.0..2.0 * dim as f64).contains(alpha) => {
                        bail!("averaging order alpha = {alpha} must lie in [0, 2n) (admissible orders of the averaging operator)")
                    }
                    O::LinearCommutator { kernel: LinearKernel::Riesz { alpha }, .. }
                        if !(*alpha > 0.0 && *alpha < dim as f64) =>
                    {
                        bail!("Riesz order alpha = {alpha} must lie in (0, n) (admissible orders of the Riesz potential)")
                    }
                    _ => {}
                }
            }
            Job::Bmo(c) => {
                for s in [&c.x1, &c.x2, &c.y] {
                    check_space(s, None)?;
                }
            }
            _ => {}
        }
        if let Some(g) = &grid {
            for s in self.spaces() {
                check_space(s, Some(g))?;
            }
        }
        Ok(())
    }

    fn spaces(&self) -> Vec<&SpaceSpec> {
        match self {
            Job::Holder(c) => vec![&c.space],
            Job::ChiDuality(c) => vec![&c.space],
            Job::Characteristic(c) => [Some(&c.x1), c.x2.as_ref(), Some(&c.y)].into_iter().flatten().collect(),
            Job::ProfileClass(c) => vec![&c.space],
            Job::Equivalence(c) => vec![&c.x1, &c.x2, &c.y],
            _ => Vec::new(),
        }
    }

    /// Estimated kernel evaluations; zero for experiments without double
    /// quadratures.
    pub fn cost(&self) -> Result<f64> {
        Ok(match self {
            Job::BallIndependence(c) => c.kernel_evaluations()?,
            Job::Truncation(c) => c.kernel_evaluations()?,
            Job::OperatorNorm(c) => c.kernel_evaluations()?,
            Job::Bmo(c) => c.kernel_evaluations(),
            _ => 0.0,
        })
    }

    /// Cells of the base grid, when the job declares one.
    pub fn cells(&self) -> Option<usize> {
        self.grid().and_then(|g| g.build().ok()).map(|g| g.len())
    }

    pub fn run(&self, id: &str) -> morrey_core::Result<ExperimentReport> {
        match self {
            Job::Holder(c) => verify::holder_check(id, c),
            Job::ChiDuality(c) => verify::chi_duality_check(id, c),
            Job::Characteristic(c) => verify::characteristic_condition(id, c),
            Job::ProfileClass(c) => verify::profile_class_check(id, c),
            Job::BallIndependence(c) => verify::ball_independence_check(id, c),
            Job::OperatorNorm(c) => verify::operator_norm_estimate(id, c),
            Job::Equivalence(c) => verify::averaging_equivalence_check(id, c),
            Job::Bmo(c) => verify::bmo_necessity_experiment(id, c),
            Job::Truncation(c) => verify::truncation_convergence_check(id, c),
            Job::FeffermanStein(c) => verify::fefferman_stein_check(id, c),
            Job::Axioms(c) => verify::bfs_axiom_check(id, c),
        }
    }
}

fn kernel_name(k: &KernelSpec) -> &'static str {
    match k {
        KernelSpec::Fractional { .. } => "fractional",
        KernelSpec::Rough { .. } => "rough",
        KernelSpec::CalderonZygmund => "calderon_zygmund",
    }
}

fn kernel_constraint(k: &KernelSpec) -> &'static str {
    match k {
        KernelSpec::Fractional { .. } => "admissible orders of the bilinear fractional integral",
        KernelSpec::Rough { .. } => "rough kernels need a bounded Omega on the sphere, mean zero when declared so",
        KernelSpec::CalderonZygmund => "size and smoothness bounds of the bilinear Calderon-Zygmund kernel",
    }
}

fn check_space(s: &SpaceSpec, grid: Option<&morrey_core::Grid>) -> Result<()> {
    let p_ok = |p: f64| p >= 1.0;
    match s {
        SpaceSpec::Lebesgue { p } | SpaceSpec::Weighted { p, .. } if !p_ok(*p) => {
            bail!("space exponent p = {p} must be at least 1 (Banach function space axioms)")
        }
        _ => {}
    }
    if let Some(g) = grid {
        s.build(g).map_err(|e| anyhow!("space: {e}"))?;
    }
    Ok(())
}
