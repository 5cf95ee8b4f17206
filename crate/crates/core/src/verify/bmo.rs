//! Growth of the commutator norm along a family with growing BMO norm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::specs::{require, FunctionSpec, KernelSpec, ProfileSpec, SpaceSpec};
use super::{drift, max_of, min_of, Check, ExperimentReport};
use crate::error::{LabError, Result};
use crate::geometry::{Ball, Cube, Grid, GridFunction, Region};
use crate::operators::{apply_nodes, bilinear_commutator, Slot, Truncation};
use crate::spaces::{bmo_norm, morrey_norm_over, BaseSpace};
use crate::weights::{w_class_check, ProfileLattice, WeightProfile};
use crate::families::BallFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmoFamily {
    /// sign(x)·min(k, log(1/|x|)); BMO norm unbounded in k.
    SignLog,
    /// max(log|x|, −k); BMO norm bounded in k.
    TruncatedLog,
}

impl BmoFamily {
    fn member(self, k: f64) -> FunctionSpec {
        match self {
            BmoFamily::SignLog => FunctionSpec::SignLog { level: k },
            BmoFamily::TruncatedLog => FunctionSpec::TruncatedLog { level: k },
        }
    }

    /// Sign-log lives on the unit interval, so δ ≤ 1/2. The truncated log is
    /// dilation covariant up to its cut, and the sup needs scales where the
    /// cut falls below one cell: δ up to 64.
    pub fn default_scales(self) -> Vec<f64> {
        let top = match self {
            BmoFamily::SignLog => 1,
            BmoFamily::TruncatedLog => -6,
        };
        (top..=9).map(|j| 0.5f64.powi(j)).collect()
    }

    /// Growth is expected for the unbounded family, a plateau otherwise.
    fn expects_growth(self) -> bool {
        self == BmoFamily::SignLog
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BmoConfig {
    #[serde(default = "half_fractional")]
    pub kernel: KernelSpec,
    #[serde(default = "l2")]
    pub x1: SpaceSpec,
    #[serde(default = "l2")]
    pub x2: SpaceSpec,
    #[serde(default = "l2")]
    pub y: SpaceSpec,
    #[serde(default = "sixth")]
    pub u1: ProfileSpec,
    #[serde(default = "sixth")]
    pub u2: ProfileSpec,
    #[serde(default = "third")]
    pub u: ProfileSpec,
    pub b_family: BmoFamily,
    #[serde(default = "levels")]
    pub levels: Vec<f64>,
    /// Scales δ of the local configuration; the family default when absent.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    /// Cells per δ.
    #[serde(default = "cells")]
    pub cells: usize,
    /// Distance, in units of δ, from the origin to the center of supp f.
    #[serde(default = "shift")]
    pub shift: f64,
    /// Minimal relative increase between consecutive levels.
    #[serde(default = "growth_margin")]
    pub growth_margin: f64,
    /// Allowed relative spread of a plateau.
    #[serde(default = "plateau")]
    pub plateau: f64,
}

fn half_fractional() -> KernelSpec {
    KernelSpec::Fractional { alpha: 0.5 }
}
fn l2() -> SpaceSpec {
    SpaceSpec::Lebesgue { p: 2.0 }
}
/// r^{1/2 − 1/3}: the L² Morrey space of index 3.
fn sixth() -> ProfileSpec {
    ProfileSpec::Power { c: 1.0, lambda: 1.0 / 6.0 }
}
/// r^{1/2 − 1/6}: index 6, the fractional target of two index-3 inputs at α = 1/2.
fn third() -> ProfileSpec {
    ProfileSpec::Power { c: 1.0, lambda: 1.0 / 3.0 }
}
fn levels() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0, 5.0]
}
fn cells() -> usize {
    32
}
fn shift() -> f64 {
    6.0
}
fn growth_margin() -> f64 {
    0.05
}
fn plateau() -> f64 {
    0.15
}

impl BmoConfig {
    pub fn with_family(family: BmoFamily) -> Self {
        Self {
            kernel: half_fractional(),
            x1: l2(),
            x2: l2(),
            y: l2(),
            u1: sixth(),
            u2: sixth(),
            u: third(),
            b_family: family,
            levels: levels(),
            scales: None,
            cells: cells(),
            shift: shift(),
            growth_margin: growth_margin(),
            plateau: plateau(),
        }
    }

    pub fn scales(&self) -> Vec<f64> {
        self.scales.clone().unwrap_or_else(|| self.b_family.default_scales())
    }

    pub fn kernel_evaluations(&self) -> f64 {
        let c = self.cells as f64;
        let out = 4.0 * c + 1.0;
        let input = 2.0 * c + 1.0;
        (self.levels.len() * self.scales().len()) as f64 * out * input * input
    }
}

fn echo<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn interval(lo: f64, hi: f64) -> Result<Region> {
    Ok(Region::Cube(Cube::new([0.5 * (lo + hi), 0.0], hi - lo)?))
}

fn average(b: &GridFunction, r: &Region) -> f64 {
    let pieces = b.grid().pieces(r);
    let m: f64 = pieces.iter().map(|p| p.measure).sum();
    pieces.iter().map(|p| b.value(p.node) * p.measure).sum::<f64>() / m
}

fn oscillation_about(b: &GridFunction, r: &Region, c: f64) -> f64 {
    let pieces = b.grid().pieces(r);
    let m: f64 = pieces.iter().map(|p| p.measure).sum();
    pieces.iter().map(|p| (b.value(p.node) - c).abs() * p.measure).sum::<f64>() / m
}

/// avg_Q|b − b_Q| over avg_Q|b − b_{Q′}|; at most 2 for any Q′.
fn oscillation_factor(b: &GridFunction, q: &Region, q2: &Region) -> f64 {
    let own = oscillation_about(b, q, average(b, q));
    let other = oscillation_about(b, q, average(b, q2));
    if own == 0.0 {
        0.0
    } else {
        own / other
    }
}

struct Local {
    headline: f64,
    factors: [f64; 2],
}

/// Commutator ratio at scale δ: f = χ on [(s−1)δ, (s+1)δ], g its reflection,
/// output restricted to [−2δ, 2δ].
fn local_ratio(cfg: &BmoConfig, bspec: &FunctionSpec, delta: f64) -> Result<Local> {
    let s = cfg.shift;
    let reach = (s + 2.0) * delta;
    let h = delta / cfg.cells as f64;
    let grid = Grid::line(-reach, reach, h)?;
    let k = cfg.kernel.build(1)?;
    let b = bspec.sample(&grid)?;
    let f = FunctionSpec::Indicator { lo: vec![(s - 1.0) * delta], hi: vec![(s + 1.0) * delta] }.sample(&grid)?;
    let g = FunctionSpec::Indicator { lo: vec![-(s + 1.0) * delta], hi: vec![-(s - 1.0) * delta] }.sample(&grid)?;
    let window: Vec<usize> = (0..grid.len()).filter(|&i| grid.node(i)[0].abs() <= 2.0 * delta + 1e-12 * delta).collect();
    let t = apply_nodes(&grid, Some(&window), |x| {
        Ok(bilinear_commutator(&b, Slot::First, &f, &g, &k, h, Truncation::JointBall, x)?.kernel_form)
    })?;

    let (x1, x2, y) = (cfg.x1.build(&grid)?, cfg.x2.build(&grid)?, cfg.y.build(&grid)?);
    let (u1, u2, u) = (cfg.u1.build(&grid)?, cfg.u2.build(&grid)?, cfg.u.build(&grid)?);
    let stride = (cfg.cells / 8).max(1);
    let inputs = BallFamily::lattice(&grid, stride, 2.0 * h, reach)?.balls();
    let outputs: Vec<Ball> = BallFamily::lattice(&grid, stride, 2.0 * h, 2.0 * delta)?
        .balls()
        .into_iter()
        .filter(|ball| ball.center[0].abs() <= 2.0 * delta + 1e-12 * delta)
        .collect();
    let nf = morrey(&f, &x1, &u1, &inputs)?;
    let ng = morrey(&g, &x2, &u2, &inputs)?;
    let nt = morrey(&t, &y, &u, &outputs)?;

    let q = interval(-delta, delta)?;
    let shifted = interval((s - 1.0) * delta, (s + 1.0) * delta)?;
    Ok(Local { headline: nt / (nf * ng), factors: [oscillation_factor(&b, &q, &shifted), oscillation_factor(&b, &q, &q)] })
}

fn morrey(f: &GridFunction, x: &BaseSpace, u: &WeightProfile, balls: &[Ball]) -> Result<f64> {
    Ok(morrey_norm_over(f, x, u, balls)?.value)
}

fn profile_notes(cfg: &BmoConfig, rep: &mut ExperimentReport) {
    let grid = match Grid::line(-4.0, 4.0, 1.0 / 64.0) {
        Ok(g) => g,
        Err(_) => return,
    };
    let alpha = cfg.kernel.alpha();
    let entries = [("u1", &cfg.u1, &cfg.x1, alpha), ("u2", &cfg.u2, &cfg.x2, alpha), ("u", &cfg.u, &cfg.y, 0.0)];
    for (name, profile, space, a) in entries {
        let res = (|| {
            let u = profile.build(&grid)?;
            let x = space.build(&grid)?;
            let lattice = ProfileLattice { grid: grid.clone(), centers: vec![[0.0, 0.0]], r0: 1.0 / 32.0, levels: 6 };
            w_class_check(&u, &x, a, false, &lattice)
        })();
        match res {
            Ok(c) => rep.note(format!("profile {name}: class verdict {:?}, series max {:e}", c.verdict, c.series_max)),
            Err(e) => rep.note(format!("profile {name}: class check not evaluated ({e})")),
        }
    }
}

/// Headline per level k is the max over scales δ of the commutator ratio.
/// The unbounded family must grow strictly with a margin; the bounded one
/// must plateau.
pub fn bmo_necessity_experiment(id: &str, cfg: &BmoConfig) -> Result<ExperimentReport> {
    require(cfg.levels.len() >= 2, "bmo_necessity_experiment needs at least two levels")?;
    let scales = cfg.scales();
    require(!scales.is_empty(), "bmo_necessity_experiment needs scales")?;
    require(cfg.cells >= 4 && cfg.shift > 3.0, "need cells ≥ 4 and shift > 3")?;
    let mut rep = ExperimentReport::new(id, "bmo_necessity_experiment", echo(cfg));

    let global = Grid::line(-1.0, 1.0, 1.0 / 4096.0)?;
    let regions = BallFamily::lattice(&global, 16, 2.0 * global.h(), 1.0)?.regions();
    let mut norms = Vec::new();
    for &k in &cfg.levels {
        norms.push(bmo_norm(&cfg.b_family.member(k).sample(&global)?, &regions)?.value);
    }
    let increasing = norms.windows(2).all(|w| w[1] > w[0]);
    if cfg.b_family.expects_growth() && !increasing {
        return Err(LabError::NotBmoIncreasing);
    }

    let jobs: Vec<(usize, f64)> =
        (0..cfg.levels.len()).flat_map(|i| scales.iter().map(move |&d| (i, d))).collect();
    let locals: Vec<Local> =
        jobs.par_iter().map(|&(i, d)| local_ratio(cfg, &cfg.b_family.member(cfg.levels[i]), d)).collect::<Result<_>>()?;

    let mut heads = Vec::new();
    let mut worst_factor = 0.0f64;
    for (i, &k) in cfg.levels.iter().enumerate() {
        let per: Vec<&Local> = jobs.iter().zip(&locals).filter(|(j, _)| j.0 == i).map(|(_, l)| l).collect();
        let head = max_of(per.iter().map(|l| l.headline));
        worst_factor = worst_factor.max(max_of(per.iter().flat_map(|l| l.factors)));
        rep.row(format!("k = {k}, bmo = {:.6}", norms[i]), head, norms[i]);
        heads.push(head);
    }
    rep.headline = *heads.last().unwrap();
    if cfg.b_family.expects_growth() {
        let growth = min_of(heads.windows(2).map(|w| w[1] / w[0] - 1.0));
        rep.check(Check::at_least("minimal relative growth between levels", growth, cfg.growth_margin));
    } else {
        let spread = max_of(heads.iter().copied()) / min_of(heads.iter().copied()) - 1.0;
        rep.check(Check::at_most("plateau spread", spread, cfg.plateau));
        rep.note(format!("bmo norm drift across levels {:e}", drift(norms[0], *norms.last().unwrap())));
    }
    rep.check(Check::at_most("oscillation factor", worst_factor, 2.0 + 1e-6));
    profile_notes(cfg, &mut rep);
    Ok(rep.finish())
}
