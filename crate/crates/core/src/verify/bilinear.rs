//! Ball independence of the extended operator and convergence of the
//! truncation ladder.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::specs::{point, require, BallSpec, FunctionSpec, GridSpec, KernelSpec};
use super::{max_of, resolution_pair, Check, ExperimentReport, QUADRATURE_TOL};
use crate::error::{LabError, Result};
use crate::geometry::Grid;
use crate::operators::{extended_bilinear, local_ladder, ExtendedOptions, Truncation};

fn echo<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn quad_tol() -> f64 {
    QUADRATURE_TOL
}

fn delta0() -> f64 {
    1e-12
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallPair {
    pub first: BallSpec,
    pub second: BallSpec,
    /// Evaluation points; each is snapped to its nearest node, which must lie
    /// in both balls.
    pub nodes: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallIndependenceConfig {
    pub grid: GridSpec,
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    pub kernel: KernelSpec,
    pub pairs: Vec<BallPair>,
    #[serde(default = "quad_tol")]
    pub tolerance: f64,
    #[serde(default = "delta0")]
    pub delta0: f64,
    #[serde(default)]
    pub truncation: Truncation,
    /// Ablation: drop the tail terms of the extension.
    #[serde(default)]
    pub omit_tails: bool,
}

impl BallIndependenceConfig {
    /// Kernel evaluations at h and h/2.
    pub fn kernel_evaluations(&self) -> Result<f64> {
        let grid = self.grid.build()?;
        let nf = self.f.sample(&grid)?.support().len() as f64;
        let ng = self.g.sample(&grid)?.support().len() as f64;
        let nodes: usize = self.pairs.iter().map(|p| p.nodes.len()).sum();
        Ok(2.0 * nodes as f64 * nf * ng * (1.0 + 4.0f64.powi(grid.dim() as i32)))
    }
}

/// Relative gaps |T̃_B − T̃_B′|/(|T̃_B| + δ₀) at h and h/2.
pub fn ball_independence_check(id: &str, cfg: &BallIndependenceConfig) -> Result<ExperimentReport> {
    require(!cfg.pairs.is_empty(), "ball_independence_check needs ball pairs")?;
    let mut rep = ExperimentReport::new(id, "ball_independence_check", echo(cfg));
    rep.ladder_floor = 1e-12;
    let base = cfg.grid.build()?;
    let opts = ExtendedOptions { eps: None, mode: cfg.truncation, omit_tails: cfg.omit_tails };
    let mut level_max = Vec::new();
    for (level, grid) in resolution_pair(&base).iter().enumerate() {
        let k = cfg.kernel.build(grid.dim())?;
        let f = cfg.f.sample(grid)?;
        let g = cfg.g.sample(grid)?;
        let mut jobs = Vec::new();
        for (pi, pair) in cfg.pairs.iter().enumerate() {
            let (a, b) = (pair.first.build()?, pair.second.build()?);
            for p in &pair.nodes {
                let x = grid.nearest_node(point(p)).ok_or(LabError::NodeOutsideBall)?;
                let px = grid.node(x);
                if !a.contains(px, grid.dim()) || !b.contains(px, grid.dim()) {
                    return Err(LabError::NodeOutsideBall);
                }
                jobs.push((pi, x, a, b));
            }
        }
        let gaps: Vec<(usize, usize, f64, f64)> = jobs
            .par_iter()
            .map(|&(pi, x, a, b)| {
                let ta = extended_bilinear(&f, &g, &k, &a, x, opts)?;
                let tb = extended_bilinear(&f, &g, &k, &b, x, opts)?;
                Ok((pi, x, (ta - tb).abs(), ta.abs() + cfg.delta0))
            })
            .collect::<Result<_>>()?;
        let worst = max_of(gaps.iter().map(|g| g.2 / g.3));
        if level == 0 {
            for (pi, x, m, b) in &gaps {
                rep.row(format!("pair {pi} node {:?}", &grid.node(*x)[..grid.dim()]), *m, *b);
            }
        }
        rep.step(grid.h(), worst);
        level_max.push(worst);
    }
    rep.headline = level_max[0];
    rep.check(Check::at_most("max gap at h", level_max[0], cfg.tolerance));
    rep.check(Check::at_most("max gap at h/2", level_max[1], 0.5 * cfg.tolerance));
    if cfg.omit_tails {
        rep.note("tail terms omitted");
    }
    Ok(rep.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub grid: GridSpec,
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    pub kernel: KernelSpec,
    pub nodes: Vec<Vec<f64>>,
    /// Coarsest rung; rung k is eps0·2^{−k}.
    pub eps0: f64,
    #[serde(default = "rungs")]
    pub rungs: usize,
    /// Rungs per oscillation window.
    #[serde(default = "window")]
    pub window: usize,
    /// Exponent of the discrete L^p mean over the node set (∞ for the max).
    #[serde(default = "inf")]
    pub out_p: f64,
    #[serde(default = "quad_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub mode: Truncation,
}

fn rungs() -> usize {
    8
}
fn window() -> usize {
    4
}
fn inf() -> f64 {
    f64::INFINITY
}

impl TruncationConfig {
    pub fn kernel_evaluations(&self) -> Result<f64> {
        let grid = self.grid.build()?;
        let side = 2.0 * (self.eps0 / grid.h()).ceil() + 1.0;
        let per_node = side.powi(2 * grid.dim() as i32);
        Ok(self.nodes.len() as f64 * per_node * (1.0 + 4.0f64.powi(grid.dim() as i32)))
    }
}

fn node_mean(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        max_of(v.iter().copied())
    } else {
        (v.iter().map(|x| x.powf(p)).sum::<f64>() / v.len() as f64).powf(1.0 / p)
    }
}

/// Per window end L, the out-norm over the nodes of max − min of the ladder
/// values on rungs L−window..L.
fn window_headlines(cfg: &TruncationConfig, grid: &Grid) -> Result<(Vec<f64>, Vec<(usize, f64)>)> {
    let k = cfg.kernel.build(grid.dim())?;
    let f = cfg.f.sample(grid)?;
    let g = cfg.g.sample(grid)?;
    let ladder: Vec<f64> = (0..cfg.rungs).map(|j| cfg.eps0 * 0.5f64.powi(j as i32)).collect();
    let nodes: Vec<usize> = cfg
        .nodes
        .iter()
        .map(|p| grid.nearest_node(point(p)).ok_or_else(|| crate::error::invalid("evaluation point outside the grid")))
        .collect::<Result<_>>()?;
    let values: Vec<Vec<f64>> =
        nodes.par_iter().map(|&x| local_ladder(&f, &g, &k, &ladder, cfg.mode, x)).collect::<Result<_>>()?;
    let mut heads = Vec::new();
    for end in cfg.window..=cfg.rungs {
        let osc: Vec<f64> = values
            .iter()
            .map(|v| {
                let w = &v[end - cfg.window..end];
                max_of(w.iter().copied()) - w.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect();
        heads.push(node_mean(&osc, cfg.out_p));
    }
    let last: Vec<(usize, f64)> = nodes
        .iter()
        .zip(&values)
        .map(|(&x, v)| {
            let w = &v[cfg.rungs - cfg.window..];
            (x, max_of(w.iter().copied()) - w.iter().copied().fold(f64::INFINITY, f64::min))
        })
        .collect();
    Ok((heads, last))
}

/// Oscillation of T_ε over the tail of a dyadic ε-ladder. Ladder values are
/// measured relative to the coarsest rung, so only pairs inside the ε₀ ball
/// are enumerated.
pub fn truncation_convergence_check(id: &str, cfg: &TruncationConfig) -> Result<ExperimentReport> {
    require(cfg.rungs >= 4, "the truncation ladder needs at least four rungs")?;
    require(cfg.window >= 2 && cfg.window <= cfg.rungs, "window must lie in [2, rungs]")?;
    require(!cfg.nodes.is_empty(), "truncation_convergence_check needs nodes")?;
    let mut rep = ExperimentReport::new(id, "truncation_convergence_check", echo(cfg));
    rep.ladder_floor = 1e-12;
    let base = cfg.grid.build()?;
    let mut base_heads = Vec::new();
    for (level, grid) in resolution_pair(&base).iter().enumerate() {
        let (heads, last) = window_headlines(cfg, grid)?;
        if level == 0 {
            for (i, h) in heads.iter().enumerate() {
                rep.row(format!("window ending at rung {}", cfg.window + i), *h, cfg.tolerance);
            }
            for (x, o) in last {
                rep.row(format!("node {:?}", &grid.node(x)[..grid.dim()]), o, cfg.tolerance);
            }
            base_heads = heads.clone();
        }
        rep.step(grid.h(), *heads.last().unwrap());
    }
    rep.headline = *base_heads.last().unwrap();
    let decreasing = base_heads.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) || w[1] <= 1e-12);
    rep.check(Check::flag("headline decreases across ladder extension", decreasing));
    rep.check(Check::at_most("final headline", rep.headline, cfg.tolerance));
    rep.note("ladder values are taken relative to the coarsest rung");
    Ok(rep.finish())
}
