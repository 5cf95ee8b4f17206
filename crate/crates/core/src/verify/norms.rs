//! Operator-norm estimates and the averaging-operator equivalence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::duality::{characteristic_ratio, scale_drift, ConditionForm};
use super::specs::{point, require, CubeSpec, FamilySpec, FunctionSpec, GridSpec, KernelSpec, PairSpec, ProfileSpec, SpaceSpec};
use super::{drift, max_of, min_of, resolution_pair, Check, ExperimentReport, STABILITY};
use crate::error::{invalid, Result};
use crate::geometry::{Ball, Grid, GridFunction, Region};
use crate::operators::{
    apply_nodes, averaging_operator, bilinear_commutator, bilinear_principal, extended_bilinear, linear_commutator,
    truncated_bilinear, ExtendedOptions, LinearKernel, Slot, Truncation,
};
use crate::spaces::{bmo_norm, morrey_norm_over, BaseSpace};
use crate::weights::WeightProfile;

fn echo<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Averaging { cube: CubeSpec, alpha: f64 },
    /// Untruncated bilinear fractional integral.
    Fractional { alpha: f64 },
    /// T_ε; ε = h when absent.
    Truncated {
        kernel: KernelSpec,
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default)]
        truncation: Truncation,
    },
    /// T̃ with B = B(x, radius) at each output node x.
    Extended { kernel: KernelSpec, radius: f64 },
    Commutator {
        kernel: KernelSpec,
        b: FunctionSpec,
        slot: Slot,
        #[serde(default)]
        eps: Option<f64>,
        /// Family for the BMO norm of b in the denominator.
        #[serde(default = "default_family")]
        bmo_family: FamilySpec,
    },
    /// [b, T](f) for a linear kernel; g and the second input norm are ignored.
    LinearCommutator {
        kernel: LinearKernel,
        b: FunctionSpec,
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default = "default_family")]
        bmo_family: FamilySpec,
    },
}

impl OperatorSpec {
    fn is_linear(&self) -> bool {
        matches!(self, OperatorSpec::LinearCommutator { .. })
    }
}

fn default_family() -> FamilySpec {
    FamilySpec::Default
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    Base { space: SpaceSpec },
    Morrey { space: SpaceSpec, profile: ProfileSpec, family: FamilySpec },
}

enum BuiltNorm {
    Base(BaseSpace),
    Morrey(BaseSpace, WeightProfile, Vec<Ball>),
}

impl NormSpec {
    fn build(&self, grid: &Grid) -> Result<BuiltNorm> {
        Ok(match self {
            NormSpec::Base { space } => BuiltNorm::Base(space.build(grid)?),
            NormSpec::Morrey { space, profile, family } => {
                BuiltNorm::Morrey(space.build(grid)?, profile.build(grid)?, family.build(grid)?.balls())
            }
        })
    }
}

impl BuiltNorm {
    fn norm(&self, f: &GridFunction) -> Result<f64> {
        match self {
            BuiltNorm::Base(x) => x.norm(f),
            BuiltNorm::Morrey(x, u, balls) => Ok(morrey_norm_over(f, x, u, balls)?.value),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub grid: GridSpec,
    pub op: OperatorSpec,
    pub in1: NormSpec,
    pub in2: NormSpec,
    pub out: NormSpec,
    pub pairs: Vec<PairSpec>,
    #[serde(default = "unit")]
    pub dilations: Vec<f64>,
    #[serde(default)]
    pub dilation_center: Vec<f64>,
    /// Output nodes are restricted to this box when given.
    #[serde(default)]
    pub window: Option<(Vec<f64>, Vec<f64>)>,
    /// Compare the headline with the closed-form norm of the averaging operator.
    #[serde(default)]
    pub closed_form: bool,
    #[serde(default = "five_percent")]
    pub closed_form_tolerance: f64,
    #[serde(default = "yes")]
    pub refine: bool,
}

fn unit() -> Vec<f64> {
    vec![1.0]
}
fn five_percent() -> f64 {
    0.05
}
fn yes() -> bool {
    true
}

fn window_nodes(grid: &Grid, window: &Option<(Vec<f64>, Vec<f64>)>) -> Option<Vec<usize>> {
    window.as_ref().map(|(lo, hi)| {
        let d = grid.dim();
        (0..grid.len())
            .filter(|&i| {
                let p = grid.node(i);
                (0..d).all(|a| p[a] >= lo[a] - 1e-12 && p[a] <= hi[a] + 1e-12)
            })
            .collect()
    })
}

impl OperatorConfig {
    /// Kernel evaluations over all inputs and both resolutions.
    pub fn kernel_evaluations(&self) -> Result<f64> {
        if matches!(self.op, OperatorSpec::Averaging { .. }) {
            return Ok(0.0);
        }
        let grid = self.grid.build()?;
        let outputs = window_nodes(&grid, &self.window).map_or(grid.len(), |v| v.len()) as f64;
        let mut total = 0.0;
        for pair in &self.pairs {
            for &d in &self.dilations {
                let c = point(&self.dilation_center);
                let nf = pair.f.dilated(d, c).sample(&grid)?.support().len() as f64;
                let ng = if self.op.is_linear() { 1.0 } else { pair.g.dilated(d, c).sample(&grid)?.support().len() as f64 };
                total += outputs * nf * ng;
            }
        }
        let refine = if self.refine { 1.0 + 8.0f64.powi(grid.dim() as i32) } else { 1.0 };
        Ok(total * refine)
    }
}

fn apply(op: &OperatorSpec, grid: &Grid, f: &GridFunction, g: &GridFunction, nodes: Option<&[usize]>) -> Result<GridFunction> {
    let n = grid.dim();
    match op {
        OperatorSpec::Averaging { cube, alpha } => averaging_operator(f, g, &cube.build()?, *alpha),
        OperatorSpec::Fractional { alpha } => {
            let k = crate::operators::BilinearKernel::fractional(n, *alpha)?;
            apply_nodes(grid, nodes, |x| bilinear_principal(f, g, &k, x))
        }
        OperatorSpec::Truncated { kernel, eps, truncation } => {
            let k = kernel.build(n)?;
            let e = eps.unwrap_or(grid.h());
            apply_nodes(grid, nodes, |x| truncated_bilinear(f, g, &k, e, *truncation, x))
        }
        OperatorSpec::Extended { kernel, radius } => {
            let k = kernel.build(n)?;
            apply_nodes(grid, nodes, |x| {
                let ball = Ball { center: grid.node(x), radius: *radius };
                extended_bilinear(f, g, &k, &ball, x, ExtendedOptions::default())
            })
        }
        OperatorSpec::Commutator { kernel, b, slot, eps, .. } => {
            let k = kernel.build(n)?;
            let e = eps.unwrap_or(grid.h());
            let bf = b.sample(grid)?;
            apply_nodes(grid, nodes, |x| Ok(bilinear_commutator(&bf, *slot, f, g, &k, e, Truncation::JointBall, x)?.kernel_form))
        }
        OperatorSpec::LinearCommutator { kernel, b, eps, .. } => {
            let bf = b.sample(grid)?;
            apply_nodes(grid, nodes, |x| Ok(linear_commutator(&bf, f, kernel, *eps, x)?.kernel_form))
        }
    }
}

struct Measured {
    label: String,
    pair: usize,
    dilation: usize,
    out: f64,
    denom: f64,
}

fn measure_level(cfg: &OperatorConfig, grid: &Grid) -> Result<(Vec<Measured>, Vec<String>)> {
    let in1 = cfg.in1.build(grid)?;
    let in2 = cfg.in2.build(grid)?;
    let out = cfg.out.build(grid)?;
    let nodes = window_nodes(grid, &cfg.window);
    let bmo = match &cfg.op {
        OperatorSpec::Commutator { b, bmo_family, .. } | OperatorSpec::LinearCommutator { b, bmo_family, .. } => {
            let regions: Vec<Region> = bmo_family.build(grid)?.regions();
            bmo_norm(&b.sample(grid)?, &regions)?.value
        }
        _ => 1.0,
    };
    let c = point(&cfg.dilation_center);
    let mut jobs = Vec::new();
    for (pi, pair) in cfg.pairs.iter().enumerate() {
        for (di, &d) in cfg.dilations.iter().enumerate() {
            jobs.push((pi, di, pair.f.dilated(d, c), pair.g.dilated(d, c)));
        }
    }
    let results: Vec<Result<Option<Measured>>> = jobs
        .par_iter()
        .map(|(pi, di, fs, gs)| {
            let f = fs.sample(grid)?;
            let g = gs.sample(grid)?;
            let nf = in1.norm(&f)?;
            let ng = if cfg.op.is_linear() { 1.0 } else { in2.norm(&g)? };
            if nf == 0.0 || ng == 0.0 {
                return Ok(None);
            }
            let t = apply(&cfg.op, grid, &f, &g, nodes.as_deref())?;
            Ok(Some(Measured {
                label: format!("({}, {})", fs.label(), gs.label()),
                pair: *pi,
                dilation: *di,
                out: out.norm(&t)?,
                denom: nf * ng * bmo,
            }))
        })
        .collect();
    let mut measured = Vec::new();
    let mut notes = Vec::new();
    for (r, job) in results.into_iter().zip(&jobs) {
        match r? {
            Some(m) => measured.push(m),
            None => notes.push(format!("zero-norm input skipped: ({}, {})", job.2.label(), job.3.label())),
        }
    }
    Ok((measured, notes))
}

/// |Q|^{α/n−2}‖χ_Q‖_Y‖χ_Q‖_{X1′}‖χ_Q‖_{X2′}.
fn averaging_closed_form(cfg: &OperatorConfig, grid: &Grid) -> Result<f64> {
    let OperatorSpec::Averaging { cube, alpha } = &cfg.op else {
        return Err(invalid("closed form exists for the averaging operator only"));
    };
    let base = |n: &NormSpec| match n {
        NormSpec::Base { space } => space.build(grid),
        NormSpec::Morrey { .. } => Err(invalid("closed form needs base-space norms")),
    };
    let (x1, x2, y) = (base(&cfg.in1)?, base(&cfg.in2)?, base(&cfg.out)?);
    let region = Region::Cube(cube.build()?);
    let (m, b) = characteristic_ratio(grid, &x1, Some(&x2), &y, *alpha, ConditionForm::Cube, &region)?;
    Ok(m / b)
}

/// Headline ‖op(f, g)‖_out/(‖f‖_in1‖g‖_in2) judged by stability under family
/// enlargement, dilation and refinement.
pub fn operator_norm_estimate(id: &str, cfg: &OperatorConfig) -> Result<ExperimentReport> {
    require(!cfg.pairs.is_empty(), "operator_norm_estimate needs input pairs")?;
    require(!cfg.dilations.is_empty(), "operator_norm_estimate needs dilations")?;
    let mut rep = ExperimentReport::new(id, "operator_norm_estimate", echo(cfg));
    let base = cfg.grid.build()?;
    let levels: Vec<Grid> = if cfg.refine { resolution_pair(&base).to_vec() } else { vec![base.clone()] };
    let half = cfg.pairs.len().div_ceil(2);
    for (level, grid) in levels.iter().enumerate() {
        let (measured, notes) = measure_level(cfg, grid)?;
        let headline = max_of(measured.iter().map(|m| m.out / m.denom));
        if level == 0 {
            for n in notes {
                rep.note(n);
            }
            for m in &measured {
                rep.row(m.label.clone(), m.out, m.denom);
            }
            rep.headline = headline;
            if cfg.pairs.len() >= 2 {
                let h_half = max_of(measured.iter().filter(|m| m.pair < half).map(|m| m.out / m.denom));
                rep.check(Check::at_most("family enlargement drift", drift(h_half, headline), STABILITY));
            }
            if cfg.dilations.len() >= 2 {
                let per: Vec<f64> = (0..cfg.dilations.len())
                    .map(|d| max_of(measured.iter().filter(|m| m.dilation == d).map(|m| m.out / m.denom)))
                    .collect();
                let spread = max_of(per.iter().copied()) / min_of(per.iter().copied()) - 1.0;
                rep.check(Check::at_most("dilation spread", spread, STABILITY));
            }
            if cfg.closed_form {
                let exact = averaging_closed_form(cfg, grid)?;
                rep.note(format!("closed-form norm {exact:e}"));
                rep.check(Check::at_most("closed-form mismatch", drift(exact, headline), cfg.closed_form_tolerance));
            }
        }
        rep.step(grid.h(), headline);
    }
    if rep.rows.is_empty() {
        rep.note("every input was skipped");
    }
    Ok(rep.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub grid: GridSpec,
    pub x1: SpaceSpec,
    pub x2: SpaceSpec,
    pub y: SpaceSpec,
    pub alpha: f64,
    pub centers: Vec<Vec<f64>>,
    /// Cube sides, at least three.
    pub sides: Vec<f64>,
    /// Extra input pairs tried on every cube besides the extremizers.
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    /// Allowed max/min spread of the ratio of the two conditions.
    #[serde(default = "tracking")]
    pub tracking: f64,
}

fn tracking() -> f64 {
    1.1
}

/// Per cube, the characteristic ratio against the measured norm of A_α^Q.
pub fn averaging_equivalence_check(id: &str, cfg: &EquivalenceConfig) -> Result<ExperimentReport> {
    require(cfg.sides.len() >= 3, "averaging_equivalence_check needs at least three cube sides")?;
    require(!cfg.centers.is_empty(), "averaging_equivalence_check needs centers")?;
    let mut rep = ExperimentReport::new(id, "averaging_equivalence_check", echo(cfg));
    let grid = cfg.grid.build()?;
    let (x1, x2, y) = (cfg.x1.build(&grid)?, cfg.x2.build(&grid)?, cfg.y.build(&grid)?);
    let mut sides = cfg.sides.clone();
    sides.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cond_i = Vec::new();
    let mut cond_ii = Vec::new();
    let mut tracks = Vec::new();
    for &s in &sides {
        let (mut worst_i, mut worst_ii) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &cfg.centers {
            let cube = CubeSpec { center: c.clone(), side: s };
            let q = cube.build()?;
            let (m, b) = characteristic_ratio(&grid, &x1, Some(&x2), &y, cfg.alpha, ConditionForm::Cube, &Region::Cube(q))?;
            let (lo, hi) = cube.corners();
            let mut pairs = vec![
                PairSpec { f: cfg.x1.associate_extremizer(&lo, &hi), g: cfg.x2.associate_extremizer(&lo, &hi) },
                PairSpec { f: FunctionSpec::Indicator { lo: lo.clone(), hi: hi.clone() }, g: FunctionSpec::Indicator { lo, hi } },
            ];
            pairs.extend(cfg.pairs.iter().cloned());
            let measured: Vec<f64> = pairs
                .par_iter()
                .map(|p| {
                    let f = p.f.sample(&grid)?;
                    let g = p.g.sample(&grid)?;
                    let (nf, ng) = (x1.norm(&f)?, x2.norm(&g)?);
                    if nf == 0.0 || ng == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(y.norm(&averaging_operator(&f, &g, &q, cfg.alpha)?)? / (nf * ng))
                })
                .collect::<Result<_>>()?;
            let op = max_of(measured);
            let ci = m / b;
            rep.row(format!("Q({c:?},{s})"), op, ci);
            tracks.push(op / ci);
            worst_i = worst_i.max(ci);
            worst_ii = worst_ii.max(op);
        }
        cond_i.push(worst_i);
        cond_ii.push(worst_ii);
    }
    rep.headline = max_of(cond_ii.iter().copied());
    rep.check(Check::at_most("tracking spread", max_of(tracks.iter().copied()) / min_of(tracks.iter().copied()), cfg.tracking));
    rep.check(Check::at_most("scale drift of condition (i)", scale_drift(&cond_i), STABILITY));
    rep.check(Check::at_most("scale drift of the operator norm", scale_drift(&cond_ii), STABILITY));
    rep.note("condition (i) is normalized by |Q|^(2 - alpha/n), the exact norm scaling of the averaging operator");
    Ok(rep.finish())
}
