//! Variable exponents p(·) with values in [1, ∞], the two-part modular, the
//! Luxemburg norm and log-Hölder certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::geometry::{parse_grid_csv, write_grid_csv, Cube, Grid, GridFunction, Piece, Region};

/// Grid-sampled exponent. `f64::INFINITY` marks nodes of the set where p = ∞.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFunction {
    grid: Grid,
    values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    p_infinity: Option<f64>,
}

impl ExponentFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidGrid(format!("{} exponents for {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| v.is_nan() || *v < 1.0) {
            return Err(invalid("exponent values must lie in [1, inf]"));
        }
        let p_minus = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let p_plus = values.iter().cloned().fold(1.0, f64::max);
        Ok(Self { grid, values, p_minus, p_plus, p_infinity: None })
    }

    pub fn constant(grid: &Grid, q: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![q; grid.len()])
    }

    pub fn from_fn<F: Fn(crate::geometry::Point) -> f64>(grid: &Grid, f: F) -> Result<Self> {
        Self::new(grid.clone(), (0..grid.len()).map(|i| f(grid.node(i))).collect())
    }

    /// Declares the limit p_∞ used by the decay half of the log-Hölder check.
    pub fn with_limit(mut self, p_inf: f64) -> Result<Self> {
        if !(p_inf >= 1.0) {
            return Err(invalid("p_inf must be >= 1"));
        }
        self.p_infinity = Some(p_inf);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }
    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }
    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }
    pub fn p_infinity(&self) -> Option<f64> {
        self.p_infinity
    }
    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    pub fn to_csv(&self) -> String {
        write_grid_csv(&self.grid, &self.values)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (grid, values) = parse_grid_csv(text)?;
        Self::new(grid, values)
    }
}

/// (|f|, exponent, measure) triples of a region, split by finite / infinite p.
pub(crate) struct ModularTerms {
    finite: Vec<(f64, f64, f64)>,
    sup_part: f64,
    pub(crate) region_measure: f64,
    pub(crate) max_abs: f64,
}

impl ModularTerms {
    pub(crate) fn collect(f: &GridFunction, p: &ExponentFunction, pieces: &[Piece]) -> Self {
        Self::build(pieces.iter().map(|pc| (f.value(pc.node).abs(), p.value(pc.node), pc.measure)))
    }

    /// From (|value|, exponent, measure) triples.
    pub(crate) fn build<I: Iterator<Item = (f64, f64, f64)>>(entries: I) -> Self {
        let mut finite = Vec::new();
        let mut sup_part: f64 = 0.0;
        let mut region_measure = 0.0;
        let mut max_abs: f64 = 0.0;
        for (a, q, m) in entries {
            region_measure += m;
            if a == 0.0 {
                continue;
            }
            max_abs = max_abs.max(a);
            if q.is_infinite() {
                sup_part = sup_part.max(a);
            } else {
                finite.push((a, q, m));
            }
        }
        Self { finite, sup_part, region_measure, max_abs }
    }

    pub(crate) fn norm(&self) -> f64 {
        bisect(self, None)
    }

    /// ρ_p(f/λ).
    pub(crate) fn at(&self, lambda: f64) -> f64 {
        let s: f64 = self.finite.iter().map(|&(a, q, m)| m * (a / lambda).powf(q)).sum();
        s + self.sup_part / lambda
    }
}

pub fn modular(f: &GridFunction, p: &ExponentFunction) -> Result<f64> {
    modular_on(f, p, &Region::Whole)
}

/// Quadrature of |f|^p over finite-p nodes plus max |f| over p = ∞ nodes.
pub fn modular_on(f: &GridFunction, p: &ExponentFunction, region: &Region) -> Result<f64> {
    f.grid().check_same(p.grid())?;
    let pieces = f.grid().pieces(region);
    Ok(ModularTerms::collect(f, p, &pieces).at(1.0))
}

/// One bisection sample (λ, ρ_p(f/λ)).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceStep {
    pub lambda: f64,
    pub modular: f64,
}

const LAMBDA_FLOOR: f64 = 1e-12;
const BISECTION_REL_TOL: f64 = 1e-13;

fn bisect(terms: &ModularTerms, mut trace: Option<&mut Vec<TraceStep>>) -> f64 {
    if terms.max_abs == 0.0 {
        return 0.0;
    }
    let mut lo = LAMBDA_FLOOR;
    let mut hi = terms.max_abs * (terms.region_measure + 1.0);
    if terms.at(lo) <= 1.0 {
        return lo;
    }
    for _ in 0..400 {
        if hi / lo - 1.0 <= BISECTION_REL_TOL {
            break;
        }
        let mid = (lo * hi).sqrt();
        let rho = terms.at(mid);
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceStep { lambda: mid, modular: rho });
        }
        if rho <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn luxemburg_norm(f: &GridFunction, p: &ExponentFunction) -> Result<f64> {
    luxemburg_norm_on(f, p, &Region::Whole)
}

/// inf{λ > 0 : ρ_p(χ_R f / λ) ≤ 1} by bisection on λ.
pub fn luxemburg_norm_on(f: &GridFunction, p: &ExponentFunction, region: &Region) -> Result<f64> {
    f.grid().check_same(p.grid())?;
    let pieces = f.grid().pieces(region);
    Ok(bisect(&ModularTerms::collect(f, p, &pieces), None))
}

/// Luxemburg norm together with every bisection sample.
pub fn luxemburg_trace(f: &GridFunction, p: &ExponentFunction) -> Result<(f64, Vec<TraceStep>)> {
    f.grid().check_same(p.grid())?;
    let pieces = f.grid().pieces(&Region::Whole);
    let mut trace = Vec::new();
    let norm = bisect(&ModularTerms::collect(f, p, &pieces), Some(&mut trace));
    Ok((norm, trace))
}

pub fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// Pointwise p′ with 1/p + 1/p′ = 1.
pub fn dual_exponent(p: &ExponentFunction) -> ExponentFunction {
    let values: Vec<f64> = p.values.iter().map(|&q| conjugate(q)).collect();
    let mut out = ExponentFunction::new(p.grid.clone(), values).expect("conjugates stay in [1, inf]");
    out.p_infinity = p.p_infinity.map(conjugate);
    out
}

/// Grid-level lower bounds for the log-Hölder constants of p and of 1/p.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogHolderCertificate {
    pub c_local: f64,
    pub c_infinity: f64,
    pub c_local_reciprocal: f64,
    pub c_infinity_reciprocal: f64,
    /// Limit used for the decay condition; the farthest node's value when none was declared.
    pub p_infinity: f64,
    pub p_infinity_declared: bool,
    pub h: f64,
    pub note: String,
}

/// Smallest constants with |p(x) − p(y)| ≤ C/log(e + 1/|x−y|) over node pairs
/// and |p(x) − p_∞| ≤ C/log(e + |x|) over nodes; the same for 1/p.
pub fn log_holder_constants(p: &ExponentFunction) -> Result<LogHolderCertificate> {
    if p.p_plus.is_infinite() {
        return Err(LabError::UnboundedExponent);
    }
    let g = p.grid();
    let n = g.len();
    let nodes: Vec<_> = (0..n).map(|i| g.node(i)).collect();
    let e = std::f64::consts::E;
    let (c_local, c_local_rec) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best: (f64, f64) = (0.0, 0.0);
            for j in (i + 1)..n {
                let d = g.distance(nodes[i], nodes[j]);
                let w = (e + 1.0 / d).ln();
                let dp = (p.values[i] - p.values[j]).abs();
                let dr = (1.0 / p.values[i] - 1.0 / p.values[j]).abs();
                best.0 = best.0.max(dp * w);
                best.1 = best.1.max(dr * w);
            }
            best
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let (p_inf, declared) = match p.p_infinity {
        Some(v) => (v, true),
        None => {
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = g.distance(nodes[a], [0.0, 0.0]);
                    let db = g.distance(nodes[b], [0.0, 0.0]);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap_or(0);
            (p.values[far], false)
        }
    };
    let mut c_inf: f64 = 0.0;
    let mut c_inf_rec: f64 = 0.0;
    for i in 0..n {
        let w = (e + g.distance(nodes[i], [0.0, 0.0])).ln();
        c_inf = c_inf.max((p.values[i] - p_inf).abs() * w);
        c_inf_rec = c_inf_rec.max((1.0 / p.values[i] - 1.0 / p_inf).abs() * w);
    }
    Ok(LogHolderCertificate {
        c_local,
        c_infinity: c_inf,
        c_local_reciprocal: c_local_rec,
        c_infinity_reciprocal: c_inf_rec,
        p_infinity: p_inf,
        p_infinity_declared: declared,
        h: g.h(),
        note: "sampled over grid node pairs; lower bounds for the continuum constants".into(),
    })
}

/// p_Q with 1/p_Q = average of 1/p over Q (p = ∞ contributes 0).
pub fn harmonic_mean_exponent(p: &ExponentFunction, q: &Cube) -> Result<f64> {
    let pieces = p.grid().pieces(&Region::Cube(*q));
    let m: f64 = pieces.iter().map(|pc| pc.measure).sum();
    if m <= 0.0 {
        return Err(LabError::DegenerateRegion);
    }
    let avg = pieces.iter().map(|pc| pc.measure / p.value(pc.node)).sum::<f64>() / m;
    Ok(if avg == 0.0 { f64::INFINITY } else { 1.0 / avg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_of_one_is_infinite() {
        let g = Grid::line(0.0, 1.0, 0.25).unwrap();
        let p = ExponentFunction::constant(&g, 1.0).unwrap();
        assert!(dual_exponent(&p).values().iter().all(|v| v.is_infinite()));
        let p3 = ExponentFunction::constant(&g, 3.0).unwrap();
        assert!(dual_exponent(&p3).values().iter().all(|&v| (v - 1.5).abs() < 1e-15));
    }

    #[test]
    fn rejects_exponent_below_one() {
        let g = Grid::line(0.0, 1.0, 0.25).unwrap();
        assert!(ExponentFunction::constant(&g, 0.5).is_err());
    }

    #[test]
    fn csv_keeps_infinite_sentinel() {
        let g = Grid::line(0.0, 1.0, 0.5).unwrap();
        let p = ExponentFunction::new(g, vec![1.0, 2.5, f64::INFINITY]).unwrap();
        let text = p.to_csv();
        assert!(text.contains("inf"));
        assert_eq!(ExponentFunction::from_csv(&text).unwrap(), p);
    }
}
