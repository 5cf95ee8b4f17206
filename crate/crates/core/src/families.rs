//! Finite ball and cube families standing in for the suprema over all balls.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{Ball, Cube, Grid, Point, Region};

/// Maximum of a per-region quantity with every sampled value kept.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyMax {
    pub value: f64,
    pub argmax: usize,
    pub per_region: Vec<f64>,
}

impl FamilyMax {
    pub fn from_values(per_region: Vec<f64>) -> Self {
        let (argmax, value) = per_region
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        Self { value, argmax, per_region }
    }

    pub fn min(&self) -> f64 {
        self.per_region.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Dyadic values v_min·2^k up to v_max.
pub fn dyadic_sides(v_min: f64, v_max: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut s = v_min;
    while s <= v_max * (1.0 + 1e-12) {
        v.push(s);
        s *= 2.0;
    }
    v
}

fn lattice_centers(grid: &Grid, stride: usize) -> Vec<Point> {
    let stride = stride.max(1);
    let [c0, c1] = grid.counts();
    let mut out = Vec::new();
    for i0 in (0..c0).step_by(stride) {
        for i1 in (0..c1).step_by(stride) {
            out.push(grid.node(grid.index(i0, i1)));
        }
    }
    out
}

fn fits(grid: &Grid, c: Point, half: f64) -> bool {
    let (lo, hi) = (grid.lower(), grid.upper());
    (0..grid.dim()).all(|a| c[a] - half >= lo[a] - 1e-12 && c[a] + half <= hi[a] + 1e-12)
}

/// Cubes with the given sides centered at every `stride`-th node, kept when
/// they fit inside the box.
pub fn cube_family(grid: &Grid, stride: usize, sides: &[f64]) -> Vec<Cube> {
    let centers = lattice_centers(grid, stride);
    let mut out = Vec::new();
    for &s in sides {
        for &c in &centers {
            if fits(grid, c, 0.5 * s) {
                out.push(Cube { center: c, side: s });
            }
        }
    }
    out
}

/// Centers × radii. Balls may reach past the box; norms then see ball ∩ box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
}

impl BallFamily {
    pub fn new(centers: Vec<Point>, radii: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || radii.is_empty() {
            return Err(LabError::EmptyFamily);
        }
        if radii.iter().any(|r| !(*r > 0.0)) {
            return Err(LabError::InvalidParameter("ball radii must be positive".into()));
        }
        Ok(Self { centers, radii })
    }

    /// Centers on every `stride`-th node, dyadic radii r_min·2^k ≤ r_max.
    pub fn lattice(grid: &Grid, stride: usize, r_min: f64, r_max: f64) -> Result<Self> {
        Self::new(lattice_centers(grid, stride), dyadic_sides(r_min, r_max))
    }

    /// Stride 4, radii from 2h to the box half-width.
    pub fn default_for(grid: &Grid) -> Result<Self> {
        Self::lattice(grid, 4, 2.0 * grid.h(), grid.half_width())
    }

    /// The same family with one more dyadic radius on top.
    pub fn extended(&self) -> Self {
        let mut radii = self.radii.clone();
        let top = radii.iter().cloned().fold(0.0, f64::max);
        radii.push(2.0 * top);
        Self { centers: self.centers.clone(), radii }
    }

    pub fn balls(&self) -> Vec<Ball> {
        let mut out = Vec::with_capacity(self.centers.len() * self.radii.len());
        for &c in &self.centers {
            for &r in &self.radii {
                out.push(Ball { center: c, radius: r });
            }
        }
        out
    }

    /// Balls that stay inside the box.
    pub fn inner_balls(&self, grid: &Grid) -> Vec<Ball> {
        self.balls().into_iter().filter(|b| fits(grid, b.center, b.radius)).collect()
    }

    pub fn regions(&self) -> Vec<Region> {
        self.balls().into_iter().map(Region::Ball).collect()
    }

    pub fn len(&self) -> usize {
        self.centers.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
