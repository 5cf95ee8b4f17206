//! Hardy–Littlewood and sharp maximal functions over finite ball families.

use rayon::prelude::*;

use crate::error::{invalid, LabError, Result};
use crate::families::BallFamily;
use crate::geometry::{Ball, GridFunction, Region};

/// Mf(x) = max over the radii of the average of |f| on B(x, r) ∩ box.
pub fn hl_maximal(f: &GridFunction, radii: &[f64]) -> Result<GridFunction> {
    if radii.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii must be positive"));
    }
    let grid = f.grid();
    let a = f.abs();
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let c = grid.node(x);
            radii.iter().fold(0.0, |m: f64, &r| {
                let pieces = grid.pieces(&Region::Ball(Ball { center: c, radius: r }));
                let meas: f64 = pieces.iter().map(|p| p.measure).sum();
                let s: f64 = pieces.iter().map(|p| a.value(p.node) * p.measure).sum();
                m.max(s / meas)
            })
        })
        .collect();
    GridFunction::new(grid.clone(), vals)
}

/// M♯_δ f(x) = (max over family balls B ∋ x of ⨍_B | |f|^δ − (|f|^δ)_B |)^{1/δ}.
/// Nodes that lie in no family ball get 0.
pub fn sharp_maximal(f: &GridFunction, delta: f64, family: &BallFamily) -> Result<GridFunction> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta = {delta} must lie in (0, 1]")));
    }
    let grid = f.grid();
    let n = grid.dim();
    let g = f.map(|v| v.abs().powf(delta))?;
    let balls = family.balls();
    let per_ball: Vec<(f64, Vec<usize>)> = balls
        .par_iter()
        .filter_map(|b| {
            let pieces = grid.pieces(&Region::Ball(*b));
            let meas: f64 = pieces.iter().map(|p| p.measure).sum();
            if meas <= 0.0 {
                return None;
            }
            let avg = pieces.iter().map(|p| g.value(p.node) * p.measure).sum::<f64>() / meas;
            let osc = pieces.iter().map(|p| (g.value(p.node) - avg).abs() * p.measure).sum::<f64>() / meas;
            let inside: Vec<usize> = pieces.iter().map(|p| p.node).filter(|&i| b.contains(grid.node(i), n)).collect();
            Some((osc, inside))
        })
        .collect();
    let mut out = vec![0.0f64; grid.len()];
    for (osc, nodes) in per_ball {
        for i in nodes {
            out[i] = out[i].max(osc);
        }
    }
    GridFunction::new(grid.clone(), out.into_iter().map(|v| v.powf(1.0 / delta)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    #[test]
    fn maximal_of_constant_is_constant() {
        let g = Grid::line(-1.0, 1.0, 1.0 / 16.0).unwrap();
        let f = GridFunction::constant(&g, 3.0);
        let m = hl_maximal(&f, &[0.125, 0.5]).unwrap();
        assert!(m.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn sharp_maximal_of_linear_ramp() {
        // on [0,1], f(x) = x: the mean oscillation over the whole interval is 1/4
        let g = Grid::line(0.0, 1.0, 1.0 / 256.0).unwrap();
        let f = g.sample(|p| p[0]).unwrap();
        let fam = BallFamily::new(vec![[0.5, 0.0]], vec![0.5]).unwrap();
        let m = sharp_maximal(&f, 1.0, &fam).unwrap();
        assert!((m.value(10) - 0.25).abs() < 1e-4);
    }
}
