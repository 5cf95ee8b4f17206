//! Linear operators: the Riesz potential and linear commutators.

use serde::{Deserialize, Serialize};

use super::bilinear::{apply_nodes, cell_measure, CommutatorValue};
use super::kernel::{norm, SphereFunction};
use crate::error::{invalid, Result};
use crate::geometry::GridFunction;
use crate::quadrature::rect_power_integral;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearKernel {
    /// Ω(y/|y|)/|y|^n, truncated at |y| > ε.
    Singular { omega: SphereFunction },
    /// |y|^{α−n}, 0 < α < n.
    Riesz { alpha: f64 },
}

/// ∫ over [−h/2, h/2]^n of |y|^{α−n}.
pub fn riesz_cell(dim: usize, alpha: f64, h: f64) -> f64 {
    if dim == 1 {
        2.0 * (0.5 * h).powf(alpha) / alpha
    } else {
        let a = 0.5 * h;
        rect_power_integral([-a, -a], [a, a], [0.0, 0.0], alpha - 2.0)
    }
}

/// I_α f at every node: off-diagonal sum plus the analytic singular cell.
pub fn riesz_potential(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let grid = f.grid();
    let n = grid.dim();
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0, n)")));
    }
    let h = grid.h();
    let cell = riesz_cell(n, alpha, h);
    let support: Vec<(usize, f64)> = f.support().into_iter().map(|i| (i, f.value(i) * cell_measure(grid, i))).collect();
    apply_nodes(grid, None, |x| {
        let px = grid.node(x);
        let mut s = f.value(x) * cell;
        for &(i, w) in &support {
            if i != x {
                s += w * grid.distance(px, grid.node(i)).powf(alpha - n as f64);
            }
        }
        Ok(s)
    })
}

/// [b, T](f)(x) for a linear kernel, in kernel form Σ(b(x) − b(y))K(x−y)f(y)
/// and in split form b(x)T f(x) − T(b f)(x). Pairs with y = x are dropped,
/// as are pairs with |x − y| ≤ ε when ε is given.
pub fn linear_commutator(
    b: &GridFunction,
    f: &GridFunction,
    kernel: &LinearKernel,
    eps: Option<f64>,
    x: usize,
) -> Result<CommutatorValue> {
    let grid = f.grid();
    grid.check_same(b.grid())?;
    let n = grid.dim();
    if let Some(e) = eps {
        if e < grid.h() * (1.0 - 1e-12) {
            return Err(crate::error::LabError::TruncationBelowResolution { eps: e, h: grid.h() });
        }
    }
    let px = grid.node(x);
    let k = |i: usize| -> Option<f64> {
        let py = grid.node(i);
        let d = [px[0] - py[0], px[1] - py[1]];
        let r = norm(d, n);
        if i == x || eps.is_some_and(|e| r <= e * (1.0 + 1e-9)) {
            return None;
        }
        Some(match kernel {
            LinearKernel::Singular { omega } => omega.eval(&[d[0] / r, d[1] / r][..n]) / r.powi(n as i32),
            LinearKernel::Riesz { alpha } => r.powf(alpha - n as f64),
        })
    };
    let bx = b.value(x);
    let (mut kernel_form, mut tf, mut tbf) = (0.0, 0.0, 0.0);
    for i in f.support() {
        if let Some(kv) = k(i) {
            let w = f.value(i) * cell_measure(grid, i);
            kernel_form += (bx - b.value(i)) * kv * w;
            tf += kv * w;
            tbf += kv * w * b.value(i);
        }
    }
    Ok(CommutatorValue { kernel_form, split_form: bx * tf - tbf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Grid, Region};

    #[test]
    fn riesz_potential_of_interval_at_center() {
        // I_{1/2} χ_{[-1,1]}(0) = 2∫_0^1 y^{-1/2} dy = 4
        let g = Grid::line(-2.0, 2.0, 1.0 / 512.0).unwrap();
        let f = GridFunction::indicator(&g, &Region::Ball(Ball::on_line(0.0, 1.0).unwrap()));
        let v = riesz_potential(&f, 0.5).unwrap();
        let x = g.node_at([0.0, 0.0]).unwrap();
        assert!((v.value(x) - 4.0).abs() < 0.04, "{}", v.value(x));
    }

    #[test]
    fn commutator_forms_agree() {
        let g = Grid::square([-1.0, -1.0], [1.0, 1.0], 0.125).unwrap();
        let f = g.sample(|p| (1.0 - p[0] * p[0]) * (1.0 - p[1] * p[1])).unwrap();
        let b = g.sample(|p| p[0] - 2.0 * p[1]).unwrap();
        let k = LinearKernel::Singular { omega: SphereFunction::Coordinate { index: 0 } };
        let v = linear_commutator(&b, &f, &k, Some(0.25), 40).unwrap();
        assert!((v.kernel_form - v.split_form).abs() < 1e-10);
    }
}
