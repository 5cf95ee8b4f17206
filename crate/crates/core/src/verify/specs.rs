//! Grid-independent descriptions of inputs, weights, exponents, spaces,
//! profiles and kernels. Experiments rebuild them on every grid of a
//! resolution ladder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exponents::ExponentFunction;
use crate::families::BallFamily;
use crate::geometry::{Ball, Cube, Grid, GridFunction, Point};
use crate::operators::{BilinearKernel, SphereFunction};
use crate::spaces::BaseSpace;
use crate::weights::{Weight, WeightProfile};

pub(crate) fn point(v: &[f64]) -> Point {
    [v.first().copied().unwrap_or(0.0), v.get(1).copied().unwrap_or(0.0)]
}

fn dist(p: Point, c: Point, dim: usize) -> f64 {
    let mut s = (p[0] - c[0]).powi(2);
    if dim == 2 {
        s += (p[1] - c[1]).powi(2);
    }
    s.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
}

impl GridSpec {
    pub fn line(lower: f64, upper: f64, h: f64) -> Self {
        Self { dim: 1, lower: vec![lower], upper: vec![upper], h }
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, &self.lower, &self.upper, self.h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub function: FunctionSpec,
}

/// Deterministic closed-form inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// Closed box indicator.
    Indicator { lo: Vec<f64>, hi: Vec<f64> },
    /// Closed ball indicator.
    BallIndicator { center: Vec<f64>, radius: f64 },
    /// a·((x₀−c₀)/w)^k·exp(−|x−c|²/w²), cut off at |x−c| > 4w.
    Gaussian { center: Vec<f64>, width: f64, degree: u32, amplitude: f64 },
    /// a·|x−c|^{−β} on |x−c| ≤ R; the node at c holds a cell average.
    PowerBump { center: Vec<f64>, radius: f64, beta: f64, amplitude: f64 },
    /// a·(1 − |x−c|²/R²)^k on |x−c| < R.
    SmoothBump { center: Vec<f64>, radius: f64, power: i32, amplitude: f64 },
    /// offset + slope·x.
    Linear { slope: Vec<f64>, offset: f64 },
    /// sign(x₀)·min(k, log(1/|x₀|)).
    SignLog { level: f64 },
    /// max(log|x₀|, −k); the node at the origin holds a cell average.
    TruncatedLog { level: f64 },
    Constant { value: f64 },
    /// w^s on a closed box, 0 outside.
    WeightPower { weight: WeightSpec, exponent: f64, lo: Vec<f64>, hi: Vec<f64> },
    /// Σ a_i·(1 − |x−c_i|²/r²)² with seeded centers in [lo, hi] and a_i ∈ [−1, 1].
    RandomBumps { seed: u64, count: usize, radius: f64, lo: Vec<f64>, hi: Vec<f64> },
    /// f(c + (x − c)/λ).
    Dilated { factor: f64, center: Vec<f64>, function: Box<FunctionSpec> },
    Sum { terms: Vec<Term> },
}

impl FunctionSpec {
    pub fn sample(&self, grid: &Grid) -> Result<GridFunction> {
        match self {
            FunctionSpec::RandomBumps { seed, count, radius, lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let d = grid.dim();
                let bumps: Vec<(Point, f64)> = (0..*count)
                    .map(|_| {
                        let mut c = [0.0; 2];
                        for a in 0..d {
                            c[a] = rng.gen_range(lo[a]..=hi[a]);
                        }
                        (c, rng.gen_range(-1.0..=1.0))
                    })
                    .collect();
                grid.sample(|p| {
                    bumps
                        .iter()
                        .map(|(c, a)| {
                            let t = dist(p, *c, d) / radius;
                            if t < 1.0 {
                                a * (1.0 - t * t).powi(2)
                            } else {
                                0.0
                            }
                        })
                        .sum()
                })
            }
            FunctionSpec::WeightPower { weight, exponent, lo, hi } => {
                let w = weight.build(grid)?;
                let (lo, hi) = (point(lo), point(hi));
                let d = grid.dim();
                let vals = (0..grid.len())
                    .map(|i| {
                        let p = grid.node(i);
                        let inside = (0..d).all(|a| p[a] >= lo[a] - 1e-12 && p[a] <= hi[a] + 1e-12);
                        if inside {
                            w.value(i).powf(*exponent)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                GridFunction::new(grid.clone(), vals)
            }
            FunctionSpec::Sum { terms } => {
                let mut acc = GridFunction::zeros(grid);
                for t in terms {
                    acc = acc.add(&t.function.sample(grid)?.scaled(t.weight))?;
                }
                Ok(acc)
            }
            _ => {
                let h = grid.h();
                let d = grid.dim();
                grid.sample(|p| self.eval(p, d, h))
            }
        }
    }

    fn eval(&self, p: Point, d: usize, h: f64) -> f64 {
        match self {
            FunctionSpec::Indicator { lo, hi } => {
                let inside = (0..d).all(|a| p[a] >= lo[a] - 1e-12 && p[a] <= hi[a] + 1e-12);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionSpec::BallIndicator { center, radius } => {
                if dist(p, point(center), d) <= radius * (1.0 + 1e-12) {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionSpec::Gaussian { center, width, degree, amplitude } => {
                let c = point(center);
                let r = dist(p, c, d) / width;
                if r > 4.0 {
                    return 0.0;
                }
                amplitude * ((p[0] - c[0]) / width).powi(*degree as i32) * (-r * r).exp()
            }
            FunctionSpec::PowerBump { center, radius, beta, amplitude } => {
                let r = dist(p, point(center), d);
                if r > *radius {
                    return 0.0;
                }
                if r < 0.5 * h * 1e-6 {
                    // average of |x|^{−β} over the cell, through the ball of equal volume
                    let rho = if d == 1 { 0.5 * h } else { h / std::f64::consts::PI.sqrt() };
                    return amplitude * d as f64 / (d as f64 - beta) * rho.powf(-beta);
                }
                amplitude * r.powf(-beta)
            }
            FunctionSpec::SmoothBump { center, radius, power, amplitude } => {
                let t = dist(p, point(center), d) / radius;
                if t >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - t * t).powi(*power)
                }
            }
            FunctionSpec::Linear { slope, offset } => offset + (0..d).map(|a| slope.get(a).copied().unwrap_or(0.0) * p[a]).sum::<f64>(),
            FunctionSpec::SignLog { level } => {
                let x = p[0];
                if x == 0.0 {
                    0.0
                } else {
                    x.signum() * level.min(-x.abs().ln())
                }
            }
            FunctionSpec::TruncatedLog { level } => {
                let x = p[0].abs();
                if x < 0.5 * h * 1e-6 {
                    // cell average over [−h/2, h/2]
                    let (a, t0) = (0.5 * h, (-level).exp());
                    return if t0 >= a { -level } else { a.ln() - 1.0 + t0 / a };
                } else {
                    x.ln().max(-level)
                }
            }
            FunctionSpec::Constant { value } => *value,
            FunctionSpec::Dilated { factor, center, function } => {
                let c = point(center);
                let mut q = [0.0; 2];
                for a in 0..d {
                    q[a] = c[a] + (p[a] - c[a]) / factor;
                }
                function.eval(q, d, h / factor)
            }
            FunctionSpec::RandomBumps { .. } | FunctionSpec::WeightPower { .. } | FunctionSpec::Sum { .. } => {
                unreachable!("sampled as a whole")
            }
        }
    }

    /// A short label for report tables.
    pub fn label(&self) -> String {
        match self {
            FunctionSpec::Indicator { lo, hi } => format!("chi[{lo:?},{hi:?}]"),
            FunctionSpec::BallIndicator { center, radius } => format!("chi_B({center:?},{radius})"),
            FunctionSpec::Gaussian { center, width, degree, .. } => format!("gauss({center:?},{width},{degree})"),
            FunctionSpec::PowerBump { center, radius, beta, .. } => format!("power({center:?},{radius},{beta})"),
            FunctionSpec::SmoothBump { center, radius, .. } => format!("bump({center:?},{radius})"),
            FunctionSpec::Linear { .. } => "linear".into(),
            FunctionSpec::SignLog { level } => format!("signlog({level})"),
            FunctionSpec::TruncatedLog { level } => format!("trunclog({level})"),
            FunctionSpec::Constant { value } => format!("const({value})"),
            FunctionSpec::WeightPower { exponent, .. } => format!("w^{exponent}"),
            FunctionSpec::RandomBumps { seed, count, .. } => format!("random({seed},{count})"),
            FunctionSpec::Dilated { factor, function, .. } => format!("{}@x{factor}", function.label()),
            FunctionSpec::Sum { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| format!("{}*{}", t.weight, t.function.label())).collect();
                parts.join("+")
            }
        }
    }

    pub fn dilated(&self, factor: f64, center: Point) -> Self {
        if factor == 1.0 {
            return self.clone();
        }
        FunctionSpec::Dilated { factor, center: center.to_vec(), function: Box::new(self.clone()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// scale·|x − c|^a.
    Power {
        exponent: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// exp(rate·x).
    Exponential { rate: Vec<f64> },
    Constant { value: f64 },
    Function { function: Box<FunctionSpec> },
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn build(&self, grid: &Grid) -> Result<Weight> {
        match self {
            WeightSpec::Power { exponent, center, scale } => Weight::scaled_power(grid, *scale, *exponent, point(center)),
            WeightSpec::Exponential { rate } => {
                let d = grid.dim();
                Weight::from_fn(grid, |p| (0..d).map(|a| rate.get(a).copied().unwrap_or(0.0) * p[a]).sum::<f64>().exp())
            }
            WeightSpec::Constant { value } => Weight::constant(grid, *value),
            WeightSpec::Function { function } => Weight::new(function.sample(grid)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSpec {
    Constant { value: f64 },
    /// base + amplitude/log(e + |x|), with limit `base` at infinity.
    LogDecay { base: f64, amplitude: f64 },
    /// `left` for x₀ ≤ at, `right` beyond.
    Step { left: f64, right: f64, at: f64 },
    Function {
        function: FunctionSpec,
        #[serde(default)]
        limit: Option<f64>,
    },
}

impl ExponentSpec {
    pub fn build(&self, grid: &Grid) -> Result<ExponentFunction> {
        let d = grid.dim();
        match self {
            ExponentSpec::Constant { value } => ExponentFunction::constant(grid, *value)?.with_limit(*value),
            ExponentSpec::LogDecay { base, amplitude } => {
                let e = std::f64::consts::E;
                ExponentFunction::from_fn(grid, |p| {
                    let r = dist(p, [0.0, 0.0], d);
                    base + amplitude / (e + r).ln()
                })?
                .with_limit(*base)
            }
            ExponentSpec::Step { left, right, at } => {
                let p = ExponentFunction::from_fn(grid, |p| if p[0] <= *at + 1e-12 { *left } else { *right })?;
                p.with_limit(*right)
            }
            ExponentSpec::Function { function, limit } => {
                let v = function.sample(grid)?;
                let p = ExponentFunction::new(grid.clone(), v.into_values())?;
                match limit {
                    Some(l) => p.with_limit(*l),
                    None => Ok(p),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Lebesgue { p: f64 },
    /// Accepts p < 1; for negative controls only.
    LebesgueUnchecked { p: f64 },
    Weighted { p: f64, weight: WeightSpec },
    Variable { exponent: ExponentSpec },
}

impl SpaceSpec {
    pub fn build(&self, grid: &Grid) -> Result<BaseSpace> {
        match self {
            SpaceSpec::Lebesgue { p } => BaseSpace::lebesgue(*p),
            SpaceSpec::LebesgueUnchecked { p } => BaseSpace::lebesgue_unchecked(*p),
            SpaceSpec::Weighted { p, weight } => BaseSpace::weighted(*p, weight.build(grid)?),
            SpaceSpec::Variable { exponent } => Ok(BaseSpace::variable(exponent.build(grid)?)),
        }
    }

    /// A nodewise function close to the maximizer of ∫_Q g over ‖g‖_X ≤ 1.
    pub fn associate_extremizer(&self, lo: &[f64], hi: &[f64]) -> FunctionSpec {
        match self {
            SpaceSpec::Weighted { p, weight } if *p > 1.0 && p.is_finite() => FunctionSpec::WeightPower {
                weight: weight.clone(),
                exponent: 1.0 - crate::exponents::conjugate(*p),
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            },
            _ => FunctionSpec::Indicator { lo: lo.to_vec(), hi: hi.to_vec() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// c·r^λ.
    Power { c: f64, lambda: f64 },
    /// ‖χ_B‖_X^θ.
    BaseNorm { space: SpaceSpec, theta: f64 },
    /// ω(B)^κ.
    Measure { weight: WeightSpec, kappa: f64 },
    Product { first: Box<ProfileSpec>, second: Box<ProfileSpec> },
}

impl ProfileSpec {
    pub fn build(&self, grid: &Grid) -> Result<WeightProfile> {
        Ok(match self {
            ProfileSpec::Power { c, lambda } => WeightProfile::Power { c: *c, lambda: *lambda },
            ProfileSpec::BaseNorm { space, theta } => WeightProfile::BaseNorm { space: Box::new(space.build(grid)?), theta: *theta },
            ProfileSpec::Measure { weight, kappa } => WeightProfile::Measure { weight: weight.build(grid)?, kappa: *kappa },
            ProfileSpec::Product { first, second } => {
                WeightProfile::Product(Box::new(first.build(grid)?), Box::new(second.build(grid)?))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Fractional { alpha: f64 },
    Rough {
        #[serde(default)]
        alpha: f64,
        omega: SphereFunction,
        mean_zero: bool,
    },
    CalderonZygmund,
}

impl KernelSpec {
    pub fn build(&self, dim: usize) -> Result<BilinearKernel> {
        match self {
            KernelSpec::Fractional { alpha } => BilinearKernel::fractional(dim, *alpha),
            KernelSpec::Rough { alpha, omega, mean_zero } => BilinearKernel::rough(dim, *alpha, omega.clone(), *mean_zero),
            KernelSpec::CalderonZygmund => BilinearKernel::calderon_zygmund(dim),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            KernelSpec::Fractional { alpha } | KernelSpec::Rough { alpha, .. } => *alpha,
            KernelSpec::CalderonZygmund => 0.0,
        }
    }
}

/// A finite ball family: explicit, or a node lattice with dyadic radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Explicit { centers: Vec<Vec<f64>>, radii: Vec<f64> },
    Lattice { stride: usize, r_min: f64, r_max: f64 },
    /// Stride 4, radii from 2h to the box half-width.
    Default,
}

impl FamilySpec {
    pub fn build(&self, grid: &Grid) -> Result<BallFamily> {
        match self {
            FamilySpec::Explicit { centers, radii } => BallFamily::new(centers.iter().map(|c| point(c)).collect(), radii.clone()),
            FamilySpec::Lattice { stride, r_min, r_max } => BallFamily::lattice(grid, *stride, *r_min, *r_max),
            FamilySpec::Default => BallFamily::default_for(grid),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn build(&self) -> Result<Ball> {
        Ball::new(point(&self.center), self.radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub center: Vec<f64>,
    pub side: f64,
}

impl CubeSpec {
    pub fn build(&self) -> Result<Cube> {
        Cube::new(point(&self.center), self.side)
    }

    pub fn corners(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().map(|c| c - 0.5 * self.side).collect();
        let hi = self.center.iter().map(|c| c + 0.5 * self.side).collect();
        (lo, hi)
    }
}

/// Input pair (f, g).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub f: FunctionSpec,
    pub g: FunctionSpec,
}

impl PairSpec {
    pub fn label(&self) -> String {
        format!("({}, {})", self.f.label(), self.g.label())
    }
}

pub(crate) fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_round_trip_through_json() {
        let f = FunctionSpec::Sum {
            terms: vec![
                Term { weight: 1.0, function: FunctionSpec::Indicator { lo: vec![-1.0], hi: vec![0.0] } },
                Term { weight: -1.0, function: FunctionSpec::Indicator { lo: vec![0.0], hi: vec![1.0] } },
            ],
        };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<FunctionSpec>(&s).unwrap(), f);
        let g = Grid::line(-2.0, 2.0, 0.25).unwrap();
        let v = f.sample(&g).unwrap();
        assert_eq!(v.value(g.node_at([-0.5, 0.0]).unwrap()), 1.0);
        assert_eq!(v.value(g.node_at([0.5, 0.0]).unwrap()), -1.0);
    }

    #[test]
    fn dilation_stretches_support() {
        let g = Grid::line(-4.0, 4.0, 0.25).unwrap();
        let f = FunctionSpec::BallIndicator { center: vec![0.0], radius: 1.0 }.dilated(2.0, [0.0, 0.0]);
        assert_eq!(f.sample(&g).unwrap().support().len(), 17);
    }

    #[test]
    fn step_exponent_has_right_limit() {
        let g = Grid::line(0.0, 2.0, 0.5).unwrap();
        let p = ExponentSpec::Step { left: 1.0, right: 2.0, at: 1.0 }.build(&g).unwrap();
        assert_eq!(p.values(), &[1.0, 1.0, 1.0, 2.0, 2.0]);
    }
}
