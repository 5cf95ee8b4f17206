//! Weights, Muckenhoupt-type constants over finite cube families, reverse
//! Hölder ratios, and the Morrey profile class checker.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::exponents::conjugate;
use crate::families::FamilyMax;
use crate::geometry::{Ball, Cube, Grid, GridFunction, Piece, Point, Region};
use crate::quadrature::{abs_power_integral, rect_power_integral};
use crate::spaces::BaseSpace;
use crate::verify::Verdict;

/// Closed form `scale·|x − center|^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTag {
    pub scale: f64,
    pub exponent: f64,
    pub center: Point,
}

impl PowerTag {
    fn value(&self, p: Point, dim: usize) -> f64 {
        let mut d2 = (p[0] - self.center[0]).powi(2);
        if dim == 2 {
            d2 += (p[1] - self.center[1]).powi(2);
        }
        self.scale * d2.sqrt().powf(self.exponent)
    }

    /// ∫ over a piece of (tagged weight)^s. In one dimension every piece is
    /// integrated in closed form; in two dimensions only pieces touching the
    /// singular point are, others are sampled at the node.
    fn piece_mass(&self, s: f64, piece: &Piece, grid: &Grid, node_value: f64) -> f64 {
        let e = self.exponent * s;
        let k = self.scale.powf(s);
        if grid.dim() == 1 {
            return k * abs_power_integral(piece.lo[0], piece.hi[0], self.center[0], e);
        }
        let touches = (0..2).all(|a| piece.lo[a] <= self.center[a] && self.center[a] <= piece.hi[a]);
        if touches && e != 0.0 {
            let area = (piece.hi[0] - piece.lo[0]) * (piece.hi[1] - piece.lo[1]);
            let full = rect_power_integral(piece.lo, piece.hi, self.center, e);
            return k * full * piece.measure / area;
        }
        node_value.powf(s) * piece.measure
    }

    /// ∫ over the whole ball of (tagged weight)^s, without clipping to a box.
    fn ball_mass(&self, ball: &Ball, s: f64, dim: usize) -> Option<f64> {
        let e = self.exponent * s;
        let k = self.scale.powf(s);
        if dim == 1 {
            let c = ball.center[0];
            return Some(k * abs_power_integral(c - ball.radius, c + ball.radius, self.center[0], e));
        }
        let centered = (ball.center[0] - self.center[0]).abs() < 1e-14 && (ball.center[1] - self.center[1]).abs() < 1e-14;
        if centered {
            if e <= -2.0 {
                return Some(f64::INFINITY);
            }
            return Some(k * 2.0 * std::f64::consts::PI * ball.radius.powf(e + 2.0) / (e + 2.0));
        }
        None
    }
}

/// Strictly positive grid function with an optional power-law tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    values: GridFunction,
    tag: Option<PowerTag>,
}

impl Weight {
    pub fn new(values: GridFunction) -> Result<Self> {
        if values.values().iter().any(|&v| !(v > 0.0)) {
            return Err(LabError::NonPositiveWeight);
        }
        Ok(Self { values, tag: None })
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(GridFunction::constant(grid, c))
    }

    pub fn from_fn<F: Fn(Point) -> f64>(grid: &Grid, f: F) -> Result<Self> {
        Self::new(GridFunction::from_fn(grid, f)?)
    }

    /// |x − center|^a; the node sitting on the singular point stores the cell average.
    pub fn power(grid: &Grid, a: f64, center: Point) -> Result<Self> {
        Self::scaled_power(grid, 1.0, a, center)
    }

    pub fn scaled_power(grid: &Grid, scale: f64, a: f64, center: Point) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(LabError::NonPositiveWeight);
        }
        let tag = PowerTag { scale, exponent: a, center };
        let dim = grid.dim();
        if a <= -(dim as f64) {
            return Err(invalid(format!("|x|^{a} is not locally integrable in dimension {dim}")));
        }
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let p = grid.node(i);
            let mut v = tag.value(p, dim);
            if !(v.is_finite() && v > 0.0) {
                let (lo, hi) = grid.cell(i);
                let vol: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
                let piece = Piece { node: i, measure: vol, lo, hi };
                v = tag.piece_mass(1.0, &piece, grid, 1.0) / vol;
            }
            values.push(v);
        }
        Ok(Self { values: GridFunction::new(grid.clone(), values)?, tag: Some(tag) })
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }
    pub fn values(&self) -> &GridFunction {
        &self.values
    }
    pub fn tag(&self) -> Option<&PowerTag> {
        self.tag.as_ref()
    }
    pub fn value(&self, idx: usize) -> f64 {
        self.values.value(idx)
    }

    /// c·w.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(LabError::NonPositiveWeight);
        }
        Ok(Self {
            values: self.values.scaled(c),
            tag: self.tag.map(|t| PowerTag { scale: t.scale * c, ..t }),
        })
    }

    /// w^s.
    pub fn powf(&self, s: f64) -> Result<Self> {
        let values = self.values.map(|v| v.powf(s))?;
        let w = Self::new(values)?;
        Ok(Self {
            tag: self.tag.map(|t| PowerTag { scale: t.scale.powf(s), exponent: t.exponent * s, center: t.center }),
            ..w
        })
    }

    pub fn piece_mass(&self, piece: &Piece, s: f64) -> f64 {
        let v = self.values.value(piece.node);
        match &self.tag {
            Some(t) => t.piece_mass(s, piece, self.grid(), v),
            None => v.powf(s) * piece.measure,
        }
    }

    /// ∫_R w^s over region ∩ box.
    pub fn mass(&self, region: &Region, s: f64) -> f64 {
        self.grid().pieces(region).iter().map(|p| self.piece_mass(p, s)).sum()
    }

    /// ∫_B w^s over the whole ball when a closed form exists.
    pub fn ball_mass_unbounded(&self, ball: &Ball, s: f64) -> Option<f64> {
        self.tag.and_then(|t| t.ball_mass(ball, s, self.grid().dim()))
    }
}

/// ∫ over a piece of Π w_k^{s_k}; closed form when every factor carries a
/// power tag with a common center.
pub fn product_piece_mass(factors: &[(&Weight, f64)], piece: &Piece) -> f64 {
    let Some((first, _)) = factors.first() else {
        return piece.measure;
    };
    let grid = first.grid();
    let tags: Option<Vec<PowerTag>> = factors.iter().map(|(w, _)| w.tag).collect();
    if let Some(tags) = tags {
        let c = tags[0].center;
        if tags.iter().all(|t| t.center == c) {
            let mut scale = 1.0;
            let mut exponent = 0.0;
            for (t, (_, s)) in tags.iter().zip(factors) {
                scale *= t.scale.powf(*s);
                exponent += t.exponent * s;
            }
            let combined = PowerTag { scale, exponent, center: c };
            let node_value: f64 = factors.iter().map(|(w, s)| w.value(piece.node).powf(*s)).product();
            return combined.piece_mass(1.0, piece, grid, node_value);
        }
    }
    factors.iter().map(|(w, s)| w.value(piece.node).powf(*s)).product::<f64>() * piece.measure
}

pub fn product_mass(factors: &[(&Weight, f64)], region: &Region) -> Result<f64> {
    let Some((first, _)) = factors.first() else {
        return Err(LabError::EmptyFamily);
    };
    for (w, _) in factors {
        w.grid().check_same(first.grid())?;
    }
    Ok(first.grid().pieces(region).iter().map(|p| product_piece_mass(factors, p)).sum())
}

fn region_avg_power(w: &Weight, region: &Region, s: f64) -> Result<f64> {
    let pieces = w.grid().pieces(region);
    let m: f64 = pieces.iter().map(|p| p.measure).sum();
    if m <= 0.0 {
        return Err(LabError::DegenerateRegion);
    }
    Ok(pieces.iter().map(|p| w.piece_mass(p, s)).sum::<f64>() / m)
}

fn region_avg_product(factors: &[(&Weight, f64)], region: &Region) -> Result<f64> {
    let m = factors[0].0.grid().measure(region);
    if m <= 0.0 {
        return Err(LabError::DegenerateRegion);
    }
    Ok(product_mass(factors, region)? / m)
}

fn scan<F>(cubes: &[Cube], f: F) -> Result<FamilyMax>
where
    F: Fn(&Region) -> Result<f64> + Sync,
{
    if cubes.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    let vals: Result<Vec<f64>> = cubes.par_iter().map(|c| f(&Region::Cube(*c))).collect();
    Ok(FamilyMax::from_values(vals?))
}

/// max over cubes of (avg w)(avg w^{1−p′})^{p−1}.
pub fn ap_constant(w: &Weight, p: f64, cubes: &[Cube]) -> Result<FamilyMax> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("A_p requires 1 < p < inf, got {p}")));
    }
    let pp = conjugate(p);
    scan(cubes, |r| Ok(region_avg_power(w, r, 1.0)? * region_avg_power(w, r, 1.0 - pp)?.powf(p - 1.0)))
}

/// max over cubes of (avg w^q)^{1/q}(avg w^{−p′})^{1/p′}.
pub fn apq_constant(w: &Weight, p: f64, q: f64, cubes: &[Cube]) -> Result<FamilyMax> {
    if !(1.0 < p && p < q && q.is_finite()) {
        return Err(invalid(format!("A_(p,q) requires 1 < p < q < inf, got p = {p}, q = {q}")));
    }
    let pp = conjugate(p);
    scan(cubes, |r| Ok(region_avg_power(w, r, q)?.powf(1.0 / q) * region_avg_power(w, r, -pp)?.powf(1.0 / pp)))
}

/// Multiple-weight constant. Without `q`: the product of (avg ω*)^{1/p} and
/// (avg w_i^{1−p_i′})^{1/p_i′} with ω* = w1^{p/p1}w2^{p/p2}, 1/p = 1/p1 + 1/p2.
/// With `q`: (avg (w1w2)^q)^{1/q} Π (avg w_i^{−p_i′})^{1/p_i′}.
pub fn multiple_weight_constant(
    w1: &Weight,
    w2: &Weight,
    p1: f64,
    p2: f64,
    q: Option<f64>,
    cubes: &[Cube],
) -> Result<FamilyMax> {
    if !(p1 > 1.0 && p2 > 1.0 && p1.is_finite() && p2.is_finite()) {
        return Err(invalid(format!("multiple weights require 1 < p1, p2 < inf, got {p1}, {p2}")));
    }
    w1.grid().check_same(w2.grid())?;
    let (c1, c2) = (conjugate(p1), conjugate(p2));
    match q {
        None => {
            let p = 1.0 / (1.0 / p1 + 1.0 / p2);
            scan(cubes, |r| {
                let star = region_avg_product(&[(w1, p / p1), (w2, p / p2)], r)?;
                Ok(star.powf(1.0 / p)
                    * region_avg_power(w1, r, 1.0 - c1)?.powf(1.0 / c1)
                    * region_avg_power(w2, r, 1.0 - c2)?.powf(1.0 / c2))
            })
        }
        Some(q) => {
            if !(q > 0.0 && q.is_finite()) {
                return Err(invalid(format!("q must be positive and finite, got {q}")));
            }
            scan(cubes, |r| {
                let nu = region_avg_product(&[(w1, q), (w2, q)], r)?;
                Ok(nu.powf(1.0 / q)
                    * region_avg_power(w1, r, -c1)?.powf(1.0 / c1)
                    * region_avg_power(w2, r, -c2)?.powf(1.0 / c2))
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReverseHolderMode {
    /// ω*(B) / Π ω_i(B)^{p/p_i}.
    Product,
    /// (w1w2)^q(B) / Π (∫_B w_i^{q_i})^{q/q_i} with 1/q = 1/q1 + 1/q2.
    QPower { q1: f64, q2: f64 },
}

pub fn reverse_holder_ratio(
    w1: &Weight,
    w2: &Weight,
    p1: f64,
    p2: f64,
    ball: &Ball,
    mode: ReverseHolderMode,
) -> Result<f64> {
    let region = Region::Ball(*ball);
    match mode {
        ReverseHolderMode::Product => {
            let p = 1.0 / (1.0 / p1 + 1.0 / p2);
            let star = product_mass(&[(w1, p / p1), (w2, p / p2)], &region)?;
            Ok(star / (w1.mass(&region, 1.0).powf(p / p1) * w2.mass(&region, 1.0).powf(p / p2)))
        }
        ReverseHolderMode::QPower { q1, q2 } => {
            let q = 1.0 / (1.0 / q1 + 1.0 / q2);
            let nu = product_mass(&[(w1, q), (w2, q)], &region)?;
            Ok(nu / (w1.mass(&region, q1).powf(q / q1) * w2.mass(&region, q2).powf(q / q2)))
        }
    }
}

/// How a profile treats balls reaching past the grid box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reach {
    /// Norms and masses over ball ∩ box.
    Clipped,
    /// Closed forms over the whole ball when available, clipped otherwise.
    Unbounded,
}

/// The Morrey weight u(y, r).
#[derive(Clone, Debug)]
pub enum WeightProfile {
    /// c·r^λ.
    Power { c: f64, lambda: f64 },
    /// ‖χ_{B(y,r)}‖_X^θ.
    BaseNorm { space: Box<BaseSpace>, theta: f64 },
    /// ω(B(y,r))^κ.
    Measure { weight: Weight, kappa: f64 },
    /// u1·u2.
    Product(Box<WeightProfile>, Box<WeightProfile>),
    /// Values on (center, radius) pairs; lookup takes the nearest entry.
    Tabulated { entries: Vec<(Point, f64, f64)> },
}

impl WeightProfile {
    /// u(y, r) and whether the value had to be clipped to the box.
    pub fn eval_with(&self, grid: &Grid, ball: &Ball, reach: Reach) -> Result<(f64, bool)> {
        match self {
            WeightProfile::Power { c, lambda } => Ok((c * ball.radius.powf(*lambda), false)),
            WeightProfile::BaseNorm { space, theta } => {
                if reach == Reach::Unbounded {
                    if let Some(v) = space.indicator_norm_unbounded(ball, grid.dim()) {
                        return Ok((v.powf(*theta), false));
                    }
                }
                let v = space.norm_of_indicator(grid, &Region::Ball(*ball))?;
                Ok((v.powf(*theta), ball_exits(grid, ball)))
            }
            WeightProfile::Measure { weight, kappa } => {
                if reach == Reach::Unbounded {
                    if let Some(m) = weight.ball_mass_unbounded(ball, 1.0) {
                        return Ok((m.powf(*kappa), false));
                    }
                }
                let m = weight.mass(&Region::Ball(*ball), 1.0);
                Ok((m.powf(*kappa), ball_exits(grid, ball)))
            }
            WeightProfile::Product(a, b) => {
                let (x, cx) = a.eval_with(grid, ball, reach)?;
                let (y, cy) = b.eval_with(grid, ball, reach)?;
                Ok((x * y, cx || cy))
            }
            WeightProfile::Tabulated { entries } => {
                let best = entries.iter().min_by(|a, b| {
                    let da = tab_distance(a, ball);
                    let db = tab_distance(b, ball);
                    da.partial_cmp(&db).unwrap()
                });
                best.map(|e| (e.2, false)).ok_or(LabError::EmptyFamily)
            }
        }
    }

    pub fn eval(&self, grid: &Grid, ball: &Ball) -> Result<f64> {
        Ok(self.eval_with(grid, ball, Reach::Clipped)?.0)
    }
}

fn tab_distance(e: &(Point, f64, f64), ball: &Ball) -> f64 {
    let dc = ((e.0[0] - ball.center[0]).powi(2) + (e.0[1] - ball.center[1]).powi(2)).sqrt();
    dc / ball.radius + (e.1 / ball.radius).ln().abs()
}

fn ball_exits(g: &Grid, ball: &Ball) -> bool {
    (0..g.dim()).any(|a| {
        ball.center[a] - ball.radius < g.lower()[a] - 1e-12 || ball.center[a] + ball.radius > g.upper()[a] + 1e-12
    })
}

/// Sample lattice for the profile checker: radii r0·2^j, j = 0..=levels.
/// The grid serves norms without a closed form over whole balls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileLattice {
    pub grid: Grid,
    pub centers: Vec<Point>,
    pub r0: f64,
    pub levels: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WClassCertificate {
    pub alpha: f64,
    pub strengthened: bool,
    pub levels: usize,
    pub samples: usize,
    /// min u(x, r) over sampled r ≥ 1.
    pub min_u_large_radius: Option<f64>,
    /// max ‖χ_B‖_X / u over sampled r < 1.
    pub max_indicator_ratio_small_radius: Option<f64>,
    /// max over samples of the truncated tail series divided by u(x, r).
    pub series_max: f64,
    /// Partial sums S_1..S_J of the worst sample, divided by u.
    pub series_partial_sums: Vec<f64>,
    /// max over samples of term_{J−1}/term_{J−2}.
    pub series_last_term_ratio: f64,
    pub strengthened_series_max: Option<f64>,
    pub strengthened_last_term_ratio: Option<f64>,
    /// max u(x, 2r)/u(x, r).
    pub doubling: f64,
    /// Some ball needed a value clipped to the grid box.
    pub clipped: bool,
    pub note: String,
    pub verdict: Verdict,
}

/// Evaluates the profile conditions on a sampled lattice. The series is summed
/// from j = 0 as in the definition of the class.
pub fn w_class_check(
    u: &WeightProfile,
    x: &BaseSpace,
    alpha: f64,
    strengthened: bool,
    lattice: &ProfileLattice,
) -> Result<WClassCertificate> {
    let grid = &lattice.grid;
    let dim = grid.dim();
    if !(alpha >= 0.0 && alpha < 2.0 * dim as f64) {
        return Err(invalid(format!("alpha = {alpha} outside [0, 2n)")));
    }
    if lattice.levels < 4 {
        return Err(LabError::SeriesTruncation(lattice.levels));
    }
    if lattice.centers.is_empty() || !(lattice.r0 > 0.0) {
        return Err(LabError::EmptyFamily);
    }
    let big_j = lattice.levels;
    let samples: Vec<(Point, f64)> = lattice
        .centers
        .iter()
        .flat_map(|&c| (0..=big_j).map(move |j| (c, lattice.r0 * 2f64.powi(j as i32))))
        .collect();

    struct Sample {
        r: f64,
        u: f64,
        ind_ratio: f64,
        partial: Vec<f64>,
        last_ratio: f64,
        strong_sum: f64,
        strong_last_ratio: f64,
        doubling: f64,
        clipped: bool,
    }

    let evaluated: Result<Vec<Sample>> = samples
        .par_iter()
        .map(|&(c, r)| {
            let ball = Ball::new(c, r)?;
            let (ur, mut clipped) = u.eval_with(grid, &ball, Reach::Unbounded)?;
            let chi_r = indicator_norm(x, grid, &ball, &mut clipped)?;
            let mut partial = Vec::with_capacity(big_j);
            let mut terms = Vec::with_capacity(big_j);
            let mut s = 0.0;
            let mut strong = 0.0;
            for j in 0..big_j {
                let big = ball.dilate(2f64.powi(j as i32 + 1));
                let (u_big, cl) = u.eval_with(grid, &big, Reach::Unbounded)?;
                clipped |= cl;
                let chi_big = indicator_norm(x, grid, &big, &mut clipped)?;
                let term = 2f64.powf((j as f64 + 1.0) * alpha) * chi_r / chi_big * u_big / ur;
                s += term;
                strong += (j as f64 + 1.0) * term;
                terms.push(term);
                partial.push(s);
            }
            let last_ratio = terms[big_j - 1] / terms[big_j - 2];
            let strong_last_ratio = last_ratio * big_j as f64 / (big_j as f64 - 1.0);
            let (u2, cl) = u.eval_with(grid, &ball.dilate(2.0), Reach::Unbounded)?;
            clipped |= cl;
            Ok(Sample {
                r,
                u: ur,
                ind_ratio: chi_r / ur,
                partial,
                last_ratio,
                strong_sum: strong,
                strong_last_ratio,
                doubling: u2 / ur,
                clipped,
            })
        })
        .collect();
    let evaluated = evaluated?;

    let mut min_u: Option<f64> = None;
    let mut max_ind: Option<f64> = None;
    let mut worst = 0usize;
    let mut series_max = f64::NEG_INFINITY;
    let mut last_ratio = f64::NEG_INFINITY;
    let mut strong_max = f64::NEG_INFINITY;
    let mut strong_last = f64::NEG_INFINITY;
    let mut doubling = f64::NEG_INFINITY;
    let mut clipped = false;
    for (i, s) in evaluated.iter().enumerate() {
        if s.r >= 1.0 {
            min_u = Some(min_u.map_or(s.u, |m| m.min(s.u)));
        } else {
            max_ind = Some(max_ind.map_or(s.ind_ratio, |m| m.max(s.ind_ratio)));
        }
        let total = *s.partial.last().unwrap();
        if total > series_max {
            series_max = total;
            worst = i;
        }
        last_ratio = last_ratio.max(s.last_ratio);
        strong_max = strong_max.max(s.strong_sum);
        strong_last = strong_last.max(s.strong_last_ratio);
        doubling = doubling.max(s.doubling);
        clipped |= s.clipped;
    }

    let finite_pos = |v: Option<f64>| v.map_or(true, |x| x.is_finite() && x > 0.0);
    let mut pass = finite_pos(min_u) && finite_pos(max_ind) && last_ratio < 1.0 && doubling.is_finite();
    if strengthened {
        pass &= strong_last < 1.0;
    }
    Ok(WClassCertificate {
        alpha,
        strengthened,
        levels: big_j,
        samples: evaluated.len(),
        min_u_large_radius: min_u,
        max_indicator_ratio_small_radius: max_ind,
        series_max,
        series_partial_sums: evaluated[worst].partial.clone(),
        series_last_term_ratio: last_ratio,
        strengthened_series_max: strengthened.then_some(strong_max),
        strengthened_last_term_ratio: strengthened.then_some(strong_last),
        doubling,
        clipped,
        note: "tail series summed from j = 0 as stated in the class definition; the boundedness proofs start at j = 1".into(),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    })
}

fn indicator_norm(x: &BaseSpace, grid: &Grid, ball: &Ball, clipped: &mut bool) -> Result<f64> {
    if let Some(v) = x.indicator_norm_unbounded(ball, grid.dim()) {
        return Ok(v);
    }
    *clipped |= ball_exits(grid, ball);
    x.norm_of_indicator(grid, &Region::Ball(*ball))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_is_rejected() {
        let g = Grid::line(-1.0, 1.0, 0.25).unwrap();
        let f = g.sample(|p| p[0].abs()).unwrap();
        assert!(matches!(Weight::new(f), Err(LabError::NonPositiveWeight)));
    }

    #[test]
    fn power_weight_node_at_singularity_is_cell_average() {
        let g = Grid::line(-1.0, 1.0, 0.25).unwrap();
        let w = Weight::power(&g, -0.5, [0.0, 0.0]).unwrap();
        let mid = g.node_at([0.0, 0.0]).unwrap();
        // average of |x|^{-1/2} over [-1/8, 1/8]
        let expected = 2.0 * 2.0 * (0.125f64).sqrt() / 0.25;
        assert!((w.value(mid) - expected).abs() < 1e-12);
    }
}
