//! Uniform grids on boxes in one or two dimensions, balls and cubes, and the
//! cell-overlap quadrature every norm in the crate is built on.
//!
//! Each node owns its dual cell `[x - h/2, x + h/2]^n` clipped to the box, so
//! whole-box integration is the trapezoid rule. A region integral weights each
//! node by the exact measure of `cell ∩ region`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A point of R^n stored in two slots; the second slot is 0 in one dimension.
pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lower: Point,
    upper: Point,
    h: f64,
    counts: [usize; 2],
}

impl Grid {
    pub fn new(dim: usize, lower: &[f64], upper: &[f64], h: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(LabError::InvalidGrid(format!("dimension {dim} not in {{1,2}}")));
        }
        if lower.len() != dim || upper.len() != dim {
            return Err(LabError::InvalidGrid("corner length differs from dimension".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(LabError::InvalidGrid(format!("spacing {h} must be positive")));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let mut counts = [1usize; 2];
        for a in 0..dim {
            let width = upper[a] - lower[a];
            if !(width > 0.0 && width.is_finite()) {
                return Err(LabError::InvalidGrid(format!("empty box on axis {a}")));
            }
            let m = (width / h).round();
            if (m * h - width).abs() > 1e-12 * width {
                return Err(LabError::InvalidGrid(format!(
                    "box width {width} is not a multiple of h = {h}"
                )));
            }
            lo[a] = lower[a];
            hi[a] = upper[a];
            counts[a] = m as usize + 1;
        }
        Ok(Self { dim, lower: lo, upper: hi, h, counts })
    }

    pub fn line(lower: f64, upper: f64, h: f64) -> Result<Self> {
        Self::new(1, &[lower], &[upper], h)
    }

    pub fn square(lower: Point, upper: Point, h: f64) -> Result<Self> {
        Self::new(2, &lower, &upper, h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn lower(&self) -> Point {
        self.lower
    }
    pub fn upper(&self) -> Point {
        self.upper
    }
    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }
    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same box at spacing h/2.
    pub fn refined(&self) -> Self {
        self.with_spacing(self.h / 2.0).expect("halving keeps the box a multiple of h")
    }

    pub fn with_spacing(&self, h: f64) -> Result<Self> {
        Self::new(self.dim, &self.lower[..self.dim], &self.upper[..self.dim], h)
    }

    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.counts[1] + i1
    }

    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        (idx / self.counts[1], idx % self.counts[1])
    }

    pub fn node(&self, idx: usize) -> Point {
        let (i0, i1) = self.multi_index(idx);
        let mut p = [self.lower[0] + i0 as f64 * self.h, 0.0];
        if self.dim == 2 {
            p[1] = self.lower[1] + i1 as f64 * self.h;
        }
        p
    }

    /// Index of the node closest to `p`, if `p` lies in the closed box.
    pub fn nearest_node(&self, p: Point) -> Option<usize> {
        let mut ij = [0usize; 2];
        for a in 0..self.dim {
            let t = (p[a] - self.lower[a]) / self.h;
            if t < -0.5 || t > self.counts[a] as f64 - 0.5 {
                return None;
            }
            ij[a] = (t.round().max(0.0) as usize).min(self.counts[a] - 1);
        }
        Some(self.index(ij[0], ij[1]))
    }

    /// Exact node lookup: the node at `p` within 1e-9·h, if any.
    pub fn node_at(&self, p: Point) -> Option<usize> {
        let idx = self.nearest_node(p)?;
        let q = self.node(idx);
        let d = (0..self.dim).map(|a| (q[a] - p[a]).abs()).fold(0.0, f64::max);
        (d <= 1e-9 * self.h).then_some(idx)
    }

    /// Dual cell of a node clipped to the box.
    pub fn cell(&self, idx: usize) -> (Point, Point) {
        let x = self.node(idx);
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..self.dim {
            lo[a] = (x[a] - 0.5 * self.h).max(self.lower[a]);
            hi[a] = (x[a] + 0.5 * self.h).min(self.upper[a]);
        }
        (lo, hi)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.upper[a] - self.lower[a]).product()
    }

    /// Smallest half side of the box.
    pub fn half_width(&self) -> f64 {
        (0..self.dim)
            .map(|a| 0.5 * (self.upper[a] - self.lower[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Point {
        let mut c = [0.0; 2];
        for a in 0..self.dim {
            c[a] = 0.5 * (self.lower[a] + self.upper[a]);
        }
        c
    }

    pub fn compatible(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.counts == other.counts
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (0..self.dim).all(|a| (self.lower[a] - other.lower[a]).abs() <= 1e-12 * self.h.max(1.0))
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(LabError::GridMismatch)
        }
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let mut s = (a[0] - b[0]).powi(2);
        if self.dim == 2 {
            s += (a[1] - b[1]).powi(2);
        }
        s.sqrt()
    }

    /// Node index range along an axis whose cells may meet `[lo, hi]`.
    fn axis_range(&self, a: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        if a >= self.dim {
            return Some((0, 0));
        }
        let n = self.counts[a] as f64;
        let first = ((lo - self.lower[a]) / self.h - 0.5).floor().max(0.0);
        let last = ((hi - self.lower[a]) / self.h + 0.5).ceil().min(n - 1.0);
        (first <= last).then(|| (first as usize, last as usize))
    }

    /// Quadrature pieces of a region: every node whose clipped cell meets the
    /// region with positive measure, in row-major order.
    pub fn pieces(&self, region: &Region) -> Vec<Piece> {
        let (blo, bhi) = match region.bounding_box(self.dim) {
            Some(b) => b,
            None => (self.lower, self.upper),
        };
        let Some((a0, b0)) = self.axis_range(0, blo[0], bhi[0]) else {
            return Vec::new();
        };
        let Some((a1, b1)) = self.axis_range(1, blo[1], bhi[1]) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for i0 in a0..=b0 {
            for i1 in a1..=b1 {
                let node = self.index(i0, i1);
                let (clo, chi) = self.cell(node);
                let mut lo = clo;
                let mut hi = chi;
                for a in 0..self.dim {
                    lo[a] = lo[a].max(blo[a]);
                    hi[a] = hi[a].min(bhi[a]);
                }
                if (0..self.dim).any(|a| hi[a] <= lo[a]) {
                    continue;
                }
                let measure = match region {
                    Region::Whole | Region::Cube(_) => (0..self.dim).map(|a| hi[a] - lo[a]).product(),
                    Region::Ball(b) => {
                        if self.dim == 1 {
                            hi[0] - lo[0]
                        } else {
                            disk_rect_area(b.center, b.radius, clo, chi)
                        }
                    }
                };
                if measure > 0.0 {
                    out.push(Piece { node, measure, lo, hi });
                }
            }
        }
        out
    }

    /// |region ∩ box|.
    pub fn measure(&self, region: &Region) -> f64 {
        self.pieces(region).iter().map(|p| p.measure).sum()
    }

    pub fn sample<F: Fn(Point) -> f64>(&self, f: F) -> Result<GridFunction> {
        GridFunction::from_fn(self, f)
    }
}

/// One node's share of a region: the node, `|cell ∩ region|`, and the
/// bounding rectangle of that intersection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub node: usize,
    pub measure: f64,
    pub lo: Point,
    pub hi: Point,
}

/// Open-ball notation B(z, r); the quadrature treats it as closed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidParameter(format!("ball radius {radius} must be positive")));
        }
        Ok(Self { center, radius })
    }

    pub fn on_line(x: f64, radius: f64) -> Result<Self> {
        Self::new([x, 0.0], radius)
    }

    pub fn dilate(&self, factor: f64) -> Self {
        Self { center: self.center, radius: self.radius * factor }
    }

    /// Lebesgue measure of the whole ball in R^dim.
    pub fn volume(&self, dim: usize) -> f64 {
        if dim == 1 {
            2.0 * self.radius
        } else {
            std::f64::consts::PI * self.radius * self.radius
        }
    }

    pub fn contains(&self, p: Point, dim: usize) -> bool {
        let mut d2 = (p[0] - self.center[0]).powi(2);
        if dim == 2 {
            d2 += (p[1] - self.center[1]).powi(2);
        }
        d2 <= self.radius * self.radius * (1.0 + 1e-12)
    }
}

/// Axis-parallel cube with center and side length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Point,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Point, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(LabError::InvalidParameter(format!("cube side {side} must be positive")));
        }
        Ok(Self { center, side })
    }

    pub fn on_line(x: f64, side: f64) -> Result<Self> {
        Self::new([x, 0.0], side)
    }

    /// The interval [a, b] as a one-dimensional cube.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new([0.5 * (a + b), 0.0], b - a)
    }

    pub fn volume(&self, dim: usize) -> f64 {
        self.side.powi(dim as i32)
    }

    pub fn contains(&self, p: Point, dim: usize) -> bool {
        let half = 0.5 * self.side * (1.0 + 1e-12);
        (0..dim).all(|a| (p[a] - self.center[a]).abs() <= half)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Whole,
    Ball(Ball),
    Cube(Cube),
}

impl Region {
    pub fn contains(&self, p: Point, dim: usize) -> bool {
        match self {
            Region::Whole => true,
            Region::Ball(b) => b.contains(p, dim),
            Region::Cube(c) => c.contains(p, dim),
        }
    }

    fn bounding_box(&self, dim: usize) -> Option<(Point, Point)> {
        let (c, half) = match self {
            Region::Whole => return None,
            Region::Ball(b) => (b.center, b.radius),
            Region::Cube(q) => (q.center, 0.5 * q.side),
        };
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..dim {
            lo[a] = c[a] - half;
            hi[a] = c[a] + half;
        }
        Some((lo, hi))
    }
}

impl From<Ball> for Region {
    fn from(b: Ball) -> Self {
        Region::Ball(b)
    }
}

impl From<Cube> for Region {
    fn from(c: Cube) -> Self {
        Region::Cube(c)
    }
}

/// ∫_0^x sqrt(r² − t²) dt, with x clamped to [−r, r].
fn half_chord_primitive(x: f64, r: f64) -> f64 {
    let x = x.clamp(-r, r);
    0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).clamp(-1.0, 1.0).asin())
}

/// Area of {x² + y² ≤ r², x ≤ a, y ≤ b}.
fn disk_lower_left(a: f64, b: f64, r: f64) -> f64 {
    let a = a.min(r);
    if a <= -r || b <= -r {
        return 0.0;
    }
    let prim = |x: f64| half_chord_primitive(x, r);
    if b >= r {
        return 2.0 * (prim(a) - prim(-r));
    }
    let c = (r * r - b * b).max(0.0).sqrt();
    let mut total = 0.0;
    if b >= 0.0 {
        let v = a.min(-c);
        if v > -r {
            total += 2.0 * (prim(v) - prim(-r));
        }
        if a > c {
            total += 2.0 * (prim(a) - prim(c));
        }
    }
    let v = a.min(c);
    if v > -c {
        total += b * (v + c) + prim(v) - prim(-c);
    }
    total
}

/// Exact area of a disk intersected with an axis-parallel rectangle.
pub fn disk_rect_area(center: Point, r: f64, lo: Point, hi: Point) -> f64 {
    let x0 = lo[0] - center[0];
    let x1 = hi[0] - center[0];
    let y0 = lo[1] - center[1];
    let y1 = hi[1] - center[1];
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let near_x = if x0 > 0.0 { x0 } else if x1 < 0.0 { -x1 } else { 0.0 };
    let near_y = if y0 > 0.0 { y0 } else if y1 < 0.0 { -y1 } else { 0.0 };
    if near_x * near_x + near_y * near_y >= r * r {
        return 0.0;
    }
    let far_x = x0.abs().max(x1.abs());
    let far_y = y0.abs().max(y1.abs());
    if far_x * far_x + far_y * far_y <= r * r {
        return (x1 - x0) * (y1 - y0);
    }
    let area = disk_lower_left(x1, y1, r) - disk_lower_left(x0, y1, r) - disk_lower_left(x1, y0, r)
        + disk_lower_left(x0, y0, r);
    area.clamp(0.0, (x1 - x0) * (y1 - y0))
}

/// Real function sampled at every node of a grid; values are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidGrid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_fn<F: Fn(Point) -> f64>(grid: &Grid, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self::new(grid.clone(), values)
    }

    /// Closed indicator of a region sampled at the nodes.
    pub fn indicator(grid: &Grid, region: &Region) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| if region.contains(grid.node(i), d) { 1.0 } else { 0.0 })
            .collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &GridFunction, f: F) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn abs(&self) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Indices of nonzero nodes.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] != 0.0).collect()
    }

    pub fn to_csv(&self) -> String {
        write_grid_csv(&self.grid, &self.values)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (grid, values) = parse_grid_csv(text)?;
        Self::new(grid, values)
    }
}

fn fmt_corner(p: &Point, dim: usize) -> String {
    p[..dim].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Header block plus one value per line, row-major. Infinite values are
/// written as `inf`.
pub fn write_grid_csv(grid: &Grid, values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 12 + 64);
    s.push_str(&format!("# n={}\n", grid.dim()));
    s.push_str(&format!("# lower={}\n", fmt_corner(&grid.lower(), grid.dim())));
    s.push_str(&format!("# upper={}\n", fmt_corner(&grid.upper(), grid.dim())));
    s.push_str(&format!("# h={}\n", grid.h()));
    for v in values {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

fn parse_corner(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| LabError::Parse(format!("corner '{t}': {e}"))))
        .collect()
}

/// Inverse of [`write_grid_csv`]; accepts `inf` tokens.
pub fn parse_grid_csv(text: &str) -> Result<(Grid, Vec<f64>)> {
    let mut n = None;
    let mut lower = None;
    let mut upper = None;
    let mut h = None;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let Some((key, val)) = rest.trim().split_once('=') else {
                continue;
            };
            let val = val.trim();
            match key.trim() {
                "n" => n = Some(val.parse::<usize>().map_err(|e| LabError::Parse(format!("n: {e}")))?),
                "lower" => lower = Some(parse_corner(val)?),
                "upper" => upper = Some(parse_corner(val)?),
                "h" => h = Some(val.parse::<f64>().map_err(|e| LabError::Parse(format!("h: {e}")))?),
                _ => {}
            }
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|e| LabError::Parse(format!("line {}: '{line}': {e}", lineno + 1)))?;
        values.push(v);
    }
    let missing = |k: &str| LabError::Parse(format!("missing header field {k}"));
    let grid = Grid::new(
        n.ok_or_else(|| missing("n"))?,
        &lower.ok_or_else(|| missing("lower"))?,
        &upper.ok_or_else(|| missing("upper"))?,
        h.ok_or_else(|| missing("h"))?,
    )?;
    if values.len() != grid.len() {
        return Err(LabError::Parse(format!("{} values for {} nodes", values.len(), grid.len())));
    }
    Ok((grid, values))
}

/// Σ f(node)·|cell ∩ R| over the pieces of R.
pub fn integrate(f: &GridFunction, region: &Region) -> f64 {
    f.grid().pieces(region).iter().map(|p| f.values[p.node] * p.measure).sum()
}

pub fn region_average(f: &GridFunction, region: &Region) -> Result<f64> {
    let pieces = f.grid().pieces(region);
    let m: f64 = pieces.iter().map(|p| p.measure).sum();
    if m <= 0.0 {
        return Err(LabError::DegenerateRegion);
    }
    Ok(pieces.iter().map(|p| f.values[p.node] * p.measure).sum::<f64>() / m)
}

/// Nodewise product with the closed indicator of `region` or of its complement.
pub fn restrict(f: &GridFunction, region: &Region, complement: bool) -> GridFunction {
    let d = f.grid().dim();
    let values = f
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| if region.contains(f.grid().node(i), d) != complement { v } else { 0.0 })
        .collect();
    GridFunction { grid: f.grid().clone(), values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_non_multiple_width() {
        assert!(Grid::line(0.0, 1.0, 0.3).is_err());
        assert!(Grid::new(3, &[0.0; 3], &[1.0; 3], 0.5).is_err());
        let g = Grid::line(-2.0, 2.0, 0.25).unwrap();
        assert_eq!(g.len(), 17);
    }

    #[test]
    fn disk_rect_area_full_and_quarter() {
        let full = disk_rect_area([0.0, 0.0], 1.0, [-2.0, -2.0], [2.0, 2.0]);
        assert!((full - std::f64::consts::PI).abs() < 1e-14);
        let quarter = disk_rect_area([0.0, 0.0], 1.0, [0.0, 0.0], [3.0, 3.0]);
        assert!((quarter - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        // half-disk strip y ≤ 0.5: segment area r²acos(d/r) − d·sqrt(r²−d²) removed
        let d: f64 = 0.5;
        let seg = d.acos() - d * (1.0 - d * d).sqrt();
        let a = disk_rect_area([0.0, 0.0], 1.0, [-1.0, -1.0], [1.0, 0.5]);
        assert!((a - (std::f64::consts::PI - seg)).abs() < 1e-13);
    }

    #[test]
    fn ball_measure_exact_in_two_dimensions() {
        let g = Grid::square([-2.0, -2.0], [2.0, 2.0], 1.0 / 16.0).unwrap();
        let b = Ball::new([0.13, -0.4], 0.77).unwrap();
        let m = g.measure(&Region::Ball(b));
        assert!((m - std::f64::consts::PI * 0.77 * 0.77).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::square([-1.0, 0.0], [1.0, 0.5], 0.25).unwrap();
        let f = g.sample(|p| p[0] * 3.0 + p[1]).unwrap();
        let back = GridFunction::from_csv(&f.to_csv()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn restrict_uses_closed_boundary() {
        let g = Grid::line(-1.0, 1.0, 0.25).unwrap();
        let one = GridFunction::constant(&g, 1.0);
        let r = restrict(&one, &Region::Ball(Ball::on_line(0.0, 0.5).unwrap()), false);
        assert_eq!(r.values().iter().sum::<f64>(), 5.0);
    }
}
