use crate::error::{invalid, LabError, Result};
use crate::geometry::{region_average, Cube, GridFunction, Region};

/// A_{Q,α}(f, g) = |Q|^{α/n}·⨍_Q f·⨍_Q g·χ_Q, with averages over Q ∩ box and
/// the closed indicator taken nodewise.
pub fn averaging_operator(f: &GridFunction, g: &GridFunction, cube: &Cube, alpha: f64) -> Result<GridFunction> {
    f.grid().check_same(g.grid())?;
    let grid = f.grid();
    let n = grid.dim();
    if !(alpha >= 0.0 && alpha < 2.0 * n as f64) {
        return Err(invalid(format!("alpha = {alpha} must lie in [0, 2n)")));
    }
    let region = Region::Cube(*cube);
    if grid.measure(&region) <= 0.0 {
        return Err(LabError::DegenerateRegion);
    }
    let scale = cube.volume(n).powf(alpha / n as f64) * region_average(f, &region)? * region_average(g, &region)?;
    Ok(GridFunction::indicator(grid, &region).scaled(scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    #[test]
    fn averaging_of_ones_is_scaled_indicator() {
        let g = Grid::line(-2.0, 2.0, 0.125).unwrap();
        let one = GridFunction::constant(&g, 1.0);
        let q = Cube::interval(-1.0, 1.0).unwrap();
        let a = averaging_operator(&one, &one, &q, 0.5).unwrap();
        let x = g.node_at([0.0, 0.0]).unwrap();
        assert!((a.value(x) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.value(0), 0.0);
    }
}
