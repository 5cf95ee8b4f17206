//! Discrete bilinear operators. A pair of nodes (y1, y2) contributes
//! K(x−y1, x−y2)·f(y1)g(y2)·|cell1|·|cell2|; node offsets are kept as
//! integer multiples of h so truncation tests are exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::BilinearKernel;
use crate::error::{invalid, LabError, Result};
use crate::geometry::{Ball, Grid, GridFunction, Point};

/// Which pairs a truncation at level ε removes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Keep pairs with |x−y1|² + |x−y2|² > ε².
    #[default]
    JointBall,
    /// Keep pairs with |x−y1| > ε and |x−y2| > ε.
    Product,
}

/// Which argument a commutator multiplies by b.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    First,
    Second,
}

/// Nonzero entries of a grid function with their integer positions and
/// cell-weighted values.
pub(crate) struct Sparse {
    pub pos: Vec<[i64; 2]>,
    pub node: Vec<usize>,
    pub w: Vec<f64>,
}

impl Sparse {
    pub fn of(f: &GridFunction) -> Self {
        let g = f.grid();
        let mut s = Sparse { pos: Vec::new(), node: Vec::new(), w: Vec::new() };
        for (i, &v) in f.values().iter().enumerate() {
            if v != 0.0 {
                let (i0, i1) = g.multi_index(i);
                s.pos.push([i0 as i64, i1 as i64]);
                s.node.push(i);
                s.w.push(v * cell_measure(g, i));
            }
        }
        s
    }

    fn len(&self) -> usize {
        self.w.len()
    }
}

pub(crate) fn cell_measure(g: &Grid, i: usize) -> f64 {
    let (lo, hi) = g.cell(i);
    (0..g.dim()).map(|a| hi[a] - lo[a]).product()
}

#[inline]
fn sq(d: [i64; 2]) -> i64 {
    d[0] * d[0] + d[1] * d[1]
}

#[inline]
fn scaled(d: [i64; 2], h: f64) -> Point {
    [d[0] as f64 * h, d[1] as f64 * h]
}

#[inline]
fn separation(mode: Truncation, a1: i64, a2: i64) -> i64 {
    match mode {
        Truncation::JointBall => a1 + a2,
        Truncation::Product => a1.min(a2),
    }
}

/// (ε/h)² nudged so that pairs exactly on the sphere count as inside it.
fn threshold(eps: f64, h: f64) -> f64 {
    (eps / h).powi(2) * (1.0 + 1e-9)
}

fn check_eps(eps: f64, h: f64) -> Result<()> {
    if !(eps.is_finite() && eps >= h * (1.0 - 1e-12)) {
        return Err(LabError::TruncationBelowResolution { eps, h });
    }
    Ok(())
}

fn check_pair(f: &GridFunction, g: &GridFunction, k: &BilinearKernel) -> Result<()> {
    f.grid().check_same(g.grid())?;
    if f.grid().dim() != k.dim() {
        return Err(invalid("kernel dimension differs from grid dimension"));
    }
    Ok(())
}

fn node_pos(g: &Grid, x: usize) -> Result<[i64; 2]> {
    if x >= g.len() {
        return Err(invalid(format!("node {x} outside the grid")));
    }
    let (i0, i1) = g.multi_index(x);
    Ok([i0 as i64, i1 as i64])
}

/// Visit every pair of support nodes with its offsets (in units of h) and
/// the squared offset lengths.
#[inline]
fn for_pairs<F: FnMut(usize, usize, [i64; 2], [i64; 2], i64, i64)>(fs: &Sparse, gs: &Sparse, xp: [i64; 2], mut visit: F) {
    let d2s: Vec<([i64; 2], i64)> = gs
        .pos
        .iter()
        .map(|p| {
            let d = [xp[0] - p[0], xp[1] - p[1]];
            (d, sq(d))
        })
        .collect();
    for i in 0..fs.len() {
        let p = fs.pos[i];
        let d1 = [xp[0] - p[0], xp[1] - p[1]];
        let a1 = sq(d1);
        for (j, &(d2, a2)) in d2s.iter().enumerate() {
            visit(i, j, d1, d2, a1, a2);
        }
    }
}

/// T_ε(f, g)(x).
pub fn truncated_bilinear(
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    eps: f64,
    mode: Truncation,
    x: usize,
) -> Result<f64> {
    Ok(truncated_ladder(f, g, k, &[eps], mode, x)?[0])
}

/// T_{ε_k}(f, g)(x) for a strictly decreasing ladder ε_0 > ε_1 > …, all ≥ h,
/// in one pass over the pairs.
pub fn truncated_ladder(
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    ladder: &[f64],
    mode: Truncation,
    x: usize,
) -> Result<Vec<f64>> {
    check_pair(f, g, k)?;
    let grid = f.grid();
    let h = grid.h();
    check_ladder(ladder, h)?;
    let xp = node_pos(grid, x)?;
    let th: Vec<f64> = ladder.iter().map(|&e| threshold(e, h)).collect();
    let (fs, gs) = (Sparse::of(f), Sparse::of(g));
    let mut bucket = vec![0.0; ladder.len()];
    for_pairs(&fs, &gs, xp, |i, j, d1, d2, a1, a2| {
        let s = separation(mode, a1, a2) as f64;
        // first rung that keeps this pair; every finer rung keeps it too
        let first = th.partition_point(|&t| s <= t);
        if first < th.len() {
            bucket[first] += k.eval(scaled(d1, h), scaled(d2, h)) * fs.w[i] * gs.w[j];
        }
    });
    Ok(cumulative(bucket))
}

fn cumulative(bucket: Vec<f64>) -> Vec<f64> {
    let mut acc = 0.0;
    bucket
        .into_iter()
        .map(|b| {
            acc += b;
            acc
        })
        .collect()
}

fn check_ladder(ladder: &[f64], h: f64) -> Result<()> {
    if ladder.is_empty() {
        return Err(invalid("empty truncation ladder"));
    }
    for &e in ladder {
        check_eps(e, h)?;
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("truncation ladder must be strictly decreasing"));
    }
    Ok(())
}

/// T_{ε_k} − T_{ε_0} at x, enumerating only pairs inside the ε_0 ball
/// around (x, x). The cost depends on ε_0/h, not on the support size.
pub fn local_ladder(
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    ladder: &[f64],
    mode: Truncation,
    x: usize,
) -> Result<Vec<f64>> {
    check_pair(f, g, k)?;
    let grid = f.grid();
    let h = grid.h();
    check_ladder(ladder, h)?;
    let xp = node_pos(grid, x)?;
    let th: Vec<f64> = ladder.iter().map(|&e| threshold(e, h)).collect();
    let reach = (ladder[0] / h).ceil() as i64;
    let n = grid.dim();
    let counts = grid.counts();
    let offsets: Vec<([i64; 2], i64, usize)> = {
        let r1 = if n == 2 { reach } else { 0 };
        let mut v = Vec::new();
        for a in -reach..=reach {
            for b in -r1..=r1 {
                let d = [a, b];
                let (y0, y1) = (xp[0] - a, xp[1] - b);
                if y0 < 0 || y1 < 0 || y0 >= counts[0] as i64 || y1 >= counts[1] as i64 {
                    continue;
                }
                let s = sq(d);
                if (s as f64) > th[0] {
                    continue;
                }
                v.push((d, s, grid.index(y0 as usize, y1 as usize)));
            }
        }
        v
    };
    let fw: Vec<f64> = offsets.iter().map(|o| f.value(o.2) * cell_measure(grid, o.2)).collect();
    let gw: Vec<f64> = offsets.iter().map(|o| g.value(o.2) * cell_measure(grid, o.2)).collect();
    let mut bucket = vec![0.0; ladder.len()];
    if mode == Truncation::Product {
        // pairs move between rungs once either leg is short; the other leg
        // ranges over the whole support
        let far = |s: &Sparse| -> Vec<([i64; 2], i64, f64)> {
            (0..s.len())
                .map(|i| {
                    let d = [xp[0] - s.pos[i][0], xp[1] - s.pos[i][1]];
                    (d, sq(d), s.w[i])
                })
                .collect()
        };
        let (fa, ga) = (far(&Sparse::of(f)), far(&Sparse::of(g)));
        let mut add = |d1: [i64; 2], a1: i64, w1: f64, d2: [i64; 2], a2: i64, w2: f64| {
            let first = th.partition_point(|&t| a1.min(a2) as f64 <= t);
            if first < th.len() {
                bucket[first] += k.eval(scaled(d1, h), scaled(d2, h)) * w1 * w2;
            }
        };
        for (i, &(d1, a1, _)) in offsets.iter().enumerate() {
            if fw[i] != 0.0 {
                for &(d2, a2, w2) in &ga {
                    add(d1, a1, fw[i], d2, a2, w2);
                }
            }
        }
        for (j, &(d2, a2, _)) in offsets.iter().enumerate() {
            if gw[j] != 0.0 {
                for &(d1, a1, w1) in fa.iter().filter(|e| e.1 as f64 > th[0]) {
                    add(d1, a1, w1, d2, a2, gw[j]);
                }
            }
        }
        return Ok(cumulative(bucket));
    }
    for (i, &(d1, a1, _)) in offsets.iter().enumerate() {
        if fw[i] == 0.0 {
            continue;
        }
        for (j, &(d2, a2, _)) in offsets.iter().enumerate() {
            if gw[j] == 0.0 {
                continue;
            }
            let s = separation(mode, a1, a2) as f64;
            if s > th[0] {
                continue;
            }
            let first = th.partition_point(|&t| s <= t);
            if first < th.len() {
                bucket[first] += k.eval(scaled(d1, h), scaled(d2, h)) * fw[i] * gw[j];
            }
        }
    }
    Ok(cumulative(bucket))
}

/// sup over the ladder of |T_ε(f, g)(x)|.
pub fn maximal_truncated(
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    ladder: &[f64],
    mode: Truncation,
    x: usize,
) -> Result<f64> {
    Ok(truncated_ladder(f, g, k, ladder, mode, x)?.into_iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Σ over kept pairs of C/(|x−y1|+|x−y2|)^{2n−α}·|f(y1)||g(y2)|.
pub fn truncated_majorant(
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    eps: f64,
    mode: Truncation,
    x: usize,
) -> Result<f64> {
    check_pair(f, g, k)?;
    let grid = f.grid();
    let h = grid.h();
    check_eps(eps, h)?;
    let xp = node_pos(grid, x)?;
    let th = threshold(eps, h);
    let (fs, gs) = (Sparse::of(f), Sparse::of(g));
    let mut total = 0.0;
    for_pairs(&fs, &gs, xp, |i, j, d1, d2, a1, a2| {
        if separation(mode, a1, a2) as f64 > th {
            total += k.majorant(scaled(d1, h), scaled(d2, h)) * (fs.w[i] * gs.w[j]).abs();
        }
    });
    Ok(total)
}

/// The untruncated operator at x for α > 0: every off-diagonal pair plus
/// the analytic integral of K over the singular cell times f(x)g(x).
pub fn bilinear_principal(f: &GridFunction, g: &GridFunction, k: &BilinearKernel, x: usize) -> Result<f64> {
    check_pair(f, g, k)?;
    if k.alpha() <= 0.0 {
        return Err(invalid("the untruncated operator needs alpha > 0; use a truncation"));
    }
    let grid = f.grid();
    let h = grid.h();
    let xp = node_pos(grid, x)?;
    let (fs, gs) = (Sparse::of(f), Sparse::of(g));
    let mut total = 0.0;
    for_pairs(&fs, &gs, xp, |i, j, d1, d2, a1, a2| {
        if a1 + a2 > 0 {
            total += k.eval(scaled(d1, h), scaled(d2, h)) * fs.w[i] * gs.w[j];
        }
    });
    Ok(total + f.value(x) * g.value(x) * k.singular_cell(h))
}

/// Bilinear fractional integral I_α(f, g) at every node in `nodes`
/// (all nodes when `None`); other nodes are set to 0.
pub fn bilinear_fractional(f: &GridFunction, g: &GridFunction, alpha: f64, nodes: Option<&[usize]>) -> Result<GridFunction> {
    let k = BilinearKernel::fractional(f.grid().dim(), alpha)?;
    apply_nodes(f.grid(), nodes, |x| bilinear_principal(f, g, &k, x))
}

/// Evaluate a pointwise operator on a node set in parallel.
pub fn apply_nodes<F: Fn(usize) -> Result<f64> + Sync>(grid: &Grid, nodes: Option<&[usize]>, op: F) -> Result<GridFunction> {
    let all: Vec<usize>;
    let list = match nodes {
        Some(n) => n,
        None => {
            all = (0..grid.len()).collect();
            &all
        }
    };
    let vals: Vec<(usize, f64)> = list.par_iter().map(|&x| op(x).map(|v| (x, v))).collect::<Result<_>>()?;
    let mut out = vec![0.0; grid.len()];
    for (x, v) in vals {
        out[x] = v;
    }
    GridFunction::new(grid.clone(), out)
}

/// A commutator value computed through two independent paths.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CommutatorValue {
    /// Σ (b(x) − b(y_j))·K·f·g over kept pairs.
    pub kernel_form: f64,
    /// b(x)·T_ε(f, g)(x) − T_ε(b·f, g)(x), or with b on g.
    pub split_form: f64,
}

fn slot_product(b: &GridFunction, slot: Slot, f: &GridFunction, g: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    match slot {
        Slot::First => Ok((b.mul(f)?, g.clone())),
        Slot::Second => Ok((f.clone(), b.mul(g)?)),
    }
}

/// [b, T_ε]_j(f, g)(x).
#[allow(clippy::too_many_arguments)]
pub fn bilinear_commutator(
    b: &GridFunction,
    slot: Slot,
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    eps: f64,
    mode: Truncation,
    x: usize,
) -> Result<CommutatorValue> {
    check_pair(f, g, k)?;
    b.grid().check_same(f.grid())?;
    let grid = f.grid();
    let h = grid.h();
    check_eps(eps, h)?;
    let xp = node_pos(grid, x)?;
    let th = threshold(eps, h);
    let (fs, gs) = (Sparse::of(f), Sparse::of(g));
    let bx = b.value(x);
    let mut kernel_form = 0.0;
    for_pairs(&fs, &gs, xp, |i, j, d1, d2, a1, a2| {
        if separation(mode, a1, a2) as f64 > th {
            let by = match slot {
                Slot::First => b.value(fs.node[i]),
                Slot::Second => b.value(gs.node[j]),
            };
            kernel_form += (bx - by) * k.eval(scaled(d1, h), scaled(d2, h)) * fs.w[i] * gs.w[j];
        }
    });
    let (bf, bg) = slot_product(b, slot, f, g)?;
    let split_form = bx * truncated_bilinear(f, g, k, eps, mode, x)? - truncated_bilinear(&bf, &bg, k, eps, mode, x)?;
    Ok(CommutatorValue { kernel_form, split_form })
}

/// Options of the ball-localized extension T̃.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExtendedOptions {
    /// Truncation used for the local part; `None` means ε = h.
    pub eps: Option<f64>,
    pub mode: Truncation,
    /// Drop the three tail terms (ablation).
    pub omit_tails: bool,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        Self { eps: None, mode: Truncation::JointBall, omit_tails: false }
    }
}

/// T̃(f, g)(x) for x ∈ B: the truncated operator on (fχ_{2B}, gχ_{2B}) plus
/// the untruncated sums over pairs with y1 ∉ 2B or y2 ∉ 2B.
pub fn extended_bilinear(
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    ball: &Ball,
    x: usize,
    opts: ExtendedOptions,
) -> Result<f64> {
    extended_impl(None, Slot::First, f, g, k, ball, x, opts)
}

/// [b, T̃]_j(f, g)(x) in kernel form.
#[allow(clippy::too_many_arguments)]
pub fn extended_bilinear_commutator(
    b: &GridFunction,
    slot: Slot,
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    ball: &Ball,
    x: usize,
    opts: ExtendedOptions,
) -> Result<f64> {
    b.grid().check_same(f.grid())?;
    extended_impl(Some(b), slot, f, g, k, ball, x, opts)
}

#[allow(clippy::too_many_arguments)]
fn extended_impl(
    b: Option<&GridFunction>,
    slot: Slot,
    f: &GridFunction,
    g: &GridFunction,
    k: &BilinearKernel,
    ball: &Ball,
    x: usize,
    opts: ExtendedOptions,
) -> Result<f64> {
    check_pair(f, g, k)?;
    let grid = f.grid();
    let h = grid.h();
    let n = grid.dim();
    let eps = opts.eps.unwrap_or(h);
    check_eps(eps, h)?;
    let xp = node_pos(grid, x)?;
    if !ball.contains(grid.node(x), n) {
        return Err(LabError::NodeOutsideBall);
    }
    let twice = ball.dilate(2.0);
    let th = threshold(eps, h);
    let (fs, gs) = (Sparse::of(f), Sparse::of(g));
    let fin: Vec<bool> = fs.node.iter().map(|&i| twice.contains(grid.node(i), n)).collect();
    let gin: Vec<bool> = gs.node.iter().map(|&i| twice.contains(grid.node(i), n)).collect();
    let bx = b.map(|b| b.value(x));
    let mut total = 0.0;
    for_pairs(&fs, &gs, xp, |i, j, d1, d2, a1, a2| {
        let local = fin[i] && gin[j];
        let keep = if local { separation(opts.mode, a1, a2) as f64 > th } else { !opts.omit_tails };
        if !keep {
            return;
        }
        let factor = match (b, bx) {
            (Some(b), Some(bx)) => {
                let y = if slot == Slot::First { fs.node[i] } else { gs.node[j] };
                bx - b.value(y)
            }
            _ => 1.0,
        };
        if factor != 0.0 {
            total += factor * k.eval(scaled(d1, h), scaled(d2, h)) * fs.w[i] * gs.w[j];
        }
    });
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::operators::kernel::SphereFunction;

    fn line(h: f64) -> Grid {
        Grid::line(-2.0, 2.0, h).unwrap()
    }

    #[test]
    fn odd_kernel_vanishes_on_symmetric_input_at_center() {
        let g = line(1.0 / 32.0);
        let f = GridFunction::indicator(&g, &Region::Ball(Ball::on_line(0.0, 1.0).unwrap()));
        let k = BilinearKernel::calderon_zygmund(1).unwrap();
        let x = g.node_at([0.0, 0.0]).unwrap();
        for eps in [1.0 / 32.0, 0.25, 0.5] {
            assert!(truncated_bilinear(&f, &f, &k, eps, Truncation::JointBall, x).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_below_h_is_rejected() {
        let g = line(0.125);
        let f = GridFunction::constant(&g, 1.0);
        let k = BilinearKernel::calderon_zygmund(1).unwrap();
        assert!(matches!(
            truncated_bilinear(&f, &f, &k, 0.05, Truncation::JointBall, 3),
            Err(LabError::TruncationBelowResolution { .. })
        ));
    }

    #[test]
    fn ladder_agrees_with_single_truncations() {
        let g = line(1.0 / 16.0);
        let f = g.sample(|p| (1.0 - p[0] * p[0]).max(0.0)).unwrap();
        let b = g.sample(|p| if p[0].abs() < 1.5 { 1.0 + p[0] } else { 0.0 }).unwrap();
        let k = BilinearKernel::rough(1, 0.0, SphereFunction::Coordinate { index: 0 }, true).unwrap();
        let ladder = [0.5, 0.25, 0.125, 0.0625];
        let x = g.node_at([0.25, 0.0]).unwrap();
        for mode in [Truncation::JointBall, Truncation::Product] {
            let all = truncated_ladder(&f, &b, &k, &ladder, mode, x).unwrap();
            for (i, &e) in ladder.iter().enumerate() {
                let one = truncated_bilinear(&f, &b, &k, e, mode, x).unwrap();
                assert!((all[i] - one).abs() < 1e-12);
            }
            let local = local_ladder(&f, &b, &k, &ladder, mode, x).unwrap();
            for i in 0..ladder.len() {
                assert!((local[i] - (all[i] - all[0])).abs() < 1e-12, "{mode:?} {i}");
            }
        }
    }

    #[test]
    fn fractional_of_constants_at_center() {
        // I_1(χ, χ)(0) on [-1,1]: ∫∫ (|y1|+|y2|)^{-1} over [-1,1]² = 8 ln 2
        let h = 1.0 / 64.0;
        let g = line(h);
        let c = GridFunction::indicator(&g, &Region::Ball(Ball::on_line(0.0, 1.0).unwrap()));
        let c = c.zip_map(&g.sample(|p| if p[0].abs() > 1.0 - 1e-12 { 0.5 } else { 1.0 }).unwrap(), |a, b| a * b).unwrap();
        let x = g.node_at([0.0, 0.0]).unwrap();
        let k = BilinearKernel::fractional(1, 1.0).unwrap();
        let v = bilinear_principal(&c, &c, &k, x).unwrap();
        assert!((v - 8.0 * 2f64.ln()).abs() < 2e-2, "{v}");
    }

    #[test]
    fn commutator_paths_agree() {
        let g = line(1.0 / 16.0);
        let f = g.sample(|p| (1.0 - p[0].abs()).max(0.0)).unwrap();
        let gg = g.sample(|p| (p[0] * 3.0).sin() * (1.0 - p[0].abs() / 2.0).max(0.0)).unwrap();
        let b = g.sample(|p| p[0]).unwrap();
        let k = BilinearKernel::calderon_zygmund(1).unwrap();
        for slot in [Slot::First, Slot::Second] {
            let v = bilinear_commutator(&b, slot, &f, &gg, &k, 0.25, Truncation::JointBall, 20).unwrap();
            assert!((v.kernel_form - v.split_form).abs() < 1e-10);
        }
    }

    #[test]
    fn extension_equals_truncation_for_large_balls() {
        let g = line(1.0 / 16.0);
        let f = g.sample(|p| (1.0 - p[0].abs()).max(0.0)).unwrap();
        let k = BilinearKernel::calderon_zygmund(1).unwrap();
        let x = g.node_at([0.25, 0.0]).unwrap();
        let t = truncated_bilinear(&f, &f, &k, g.h(), Truncation::JointBall, x).unwrap();
        for r in [0.125, 0.5, 1.0] {
            let ball = Ball::on_line(0.25, r).unwrap();
            let e = extended_bilinear(&f, &f, &k, &ball, x, ExtendedOptions::default()).unwrap();
            assert!((e - t).abs() < 1e-12);
        }
        let outside = Ball::on_line(1.5, 0.25).unwrap();
        assert!(extended_bilinear(&f, &f, &k, &outside, x, ExtendedOptions::default()).is_err());
    }
}
