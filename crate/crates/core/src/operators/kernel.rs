//! Bilinear kernels K(x, y1, y2) of convolution type, written in the offsets
//! d1 = x − y1, d2 = x − y2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::geometry::Point;
use crate::quadrature::gauss_legendre;

/// A function on the unit sphere of R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SphereFunction {
    /// d = 2 only: (angle, value) samples, periodic linear interpolation.
    Angular { samples: Vec<(f64, f64)> },
    /// σ ↦ σ_k.
    Coordinate { index: usize },
    /// σ ↦ c.
    Constant { value: f64 },
}

impl SphereFunction {
    pub fn eval(&self, sigma: &[f64]) -> f64 {
        match self {
            SphereFunction::Angular { samples } => {
                let theta = sigma[1].atan2(sigma[0]).rem_euclid(2.0 * PI);
                angular_interp(samples, theta)
            }
            SphereFunction::Coordinate { index } => sigma[*index],
            SphereFunction::Constant { value } => *value,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            SphereFunction::Angular { samples } => samples.iter().fold(0.0, |m, s| m.max(s.1.abs())),
            SphereFunction::Coordinate { .. } => 1.0,
            SphereFunction::Constant { value } => value.abs(),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            SphereFunction::Angular { samples } => {
                if d != 2 {
                    return Err(invalid("angular samples describe functions on the circle only"));
                }
                if samples.len() < 2 {
                    return Err(invalid("need at least two angular samples"));
                }
                if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(invalid("angular samples must be sorted by angle"));
                }
                Ok(())
            }
            SphereFunction::Coordinate { index } => {
                if *index >= d {
                    return Err(invalid(format!("coordinate {index} out of range for dimension {d}")));
                }
                Ok(())
            }
            SphereFunction::Constant { .. } => Ok(()),
        }
    }
}

fn angular_interp(samples: &[(f64, f64)], theta: f64) -> f64 {
    let n = samples.len();
    let pos = samples.partition_point(|s| s.0 <= theta);
    let (a, b) = if pos == 0 || pos == n {
        let last = samples[n - 1];
        let first = samples[0];
        (last, (first.0 + 2.0 * PI, first.1))
    } else {
        (samples[pos - 1], samples[pos])
    };
    let t = if pos == 0 { theta + 2.0 * PI } else { theta };
    let w = (t - a.0) / (b.0 - a.0);
    a.1 + w * (b.1 - a.1)
}

/// ∫ over S^{d−1} of Ω for d ∈ {1, 2, 4}.
pub fn sphere_integral(omega: &SphereFunction, d: usize) -> f64 {
    match d {
        1 => omega.eval(&[1.0]) + omega.eval(&[-1.0]),
        2 => {
            let m = 4096;
            let dt = 2.0 * PI / m as f64;
            (0..m).map(|k| {
                let t = k as f64 * dt;
                omega.eval(&[t.cos(), t.sin()])
            })
            .sum::<f64>()
                * dt
        }
        4 => {
            // σ = (cosψ cosθ1, cosψ sinθ1, sinψ cosθ2, sinψ sinθ2), dσ = sinψ cosψ dψ dθ1 dθ2
            let (xs, ws) = gauss_legendre(32);
            let m = 128;
            let dt = 2.0 * PI / m as f64;
            let mut s = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                let psi = 0.25 * PI * (x + 1.0);
                let jac = psi.sin() * psi.cos() * 0.25 * PI * w;
                for a in 0..m {
                    let t1 = a as f64 * dt;
                    for b in 0..m {
                        let t2 = b as f64 * dt;
                        let sig = [psi.cos() * t1.cos(), psi.cos() * t1.sin(), psi.sin() * t2.cos(), psi.sin() * t2.sin()];
                        s += jac * omega.eval(&sig) * dt * dt;
                    }
                }
            }
            s
        }
        _ => f64::NAN,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelForm {
    /// (|d1| + |d2|)^{−(2n−α)}.
    Fractional,
    /// Ω(d/|d|)/|d|^{2n−α} with d = (d1, d2) ∈ R^{2n}.
    RoughHomogeneous { omega: SphereFunction, mean_zero: bool },
    /// Σ_k (d1_k + d2_k)/|d|^{2n+1}: odd, smooth off the diagonal, regularity ε = 1.
    CalderonZygmund { regularity: f64 },
}

/// Kernel descriptor with order α and the size constant C of
/// |K| ≤ C/(|x−y1| + |x−y2|)^{2n−α}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearKernel {
    dim: usize,
    alpha: f64,
    form: KernelForm,
    bound: f64,
    /// ∫ of K over the unit cube of R^{2n} centred at the singularity (α > 0).
    unit_cell: f64,
    /// The same for the majorant C/(|d1|+|d2|)^{2n−α}.
    unit_cell_majorant: f64,
}

impl BilinearKernel {
    pub fn fractional(dim: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0 * dim as f64) {
            return Err(invalid(format!("fractional order alpha = {alpha} must lie in (0, 2n) with n = {dim}")));
        }
        Self::build(dim, alpha, KernelForm::Fractional, 1.0)
    }

    pub fn rough(dim: usize, alpha: f64, omega: SphereFunction, mean_zero: bool) -> Result<Self> {
        if !(alpha >= 0.0 && alpha < 2.0 * dim as f64) {
            return Err(invalid(format!("alpha = {alpha} must lie in [0, 2n)")));
        }
        omega.validate(2 * dim)?;
        if mean_zero {
            let m = sphere_integral(&omega, 2 * dim);
            if m.abs() > 1e-6 {
                return Err(invalid(format!("Omega declared mean-zero but its sphere integral is {m:e}")));
            }
        }
        let bound = omega.sup_abs() * 2f64.powf((2.0 * dim as f64 - alpha) / 2.0);
        Self::build(dim, alpha, KernelForm::RoughHomogeneous { omega, mean_zero }, bound)
    }

    pub fn calderon_zygmund(dim: usize) -> Result<Self> {
        let n = dim as f64;
        let bound = (2.0 * n).sqrt() * 2f64.powf(n);
        Self::build(dim, 0.0, KernelForm::CalderonZygmund { regularity: 1.0 }, bound)
    }

    fn build(dim: usize, alpha: f64, form: KernelForm, bound: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid("kernels are implemented for n in {1, 2}"));
        }
        let mut k = Self { dim, alpha, form, bound, unit_cell: 0.0, unit_cell_majorant: 0.0 };
        if alpha > 0.0 {
            k.unit_cell = k.cell_integral_unit(|d1, d2| k.eval(d1, d2));
            let b = k.bound;
            let e = 2.0 * dim as f64 - alpha;
            k.unit_cell_majorant = k.cell_integral_unit(|d1, d2| b * (norm(d1, dim) + norm(d2, dim)).powf(-e));
        }
        Ok(k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn form(&self) -> &KernelForm {
        &self.form
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_odd(&self) -> bool {
        match &self.form {
            KernelForm::Fractional => false,
            KernelForm::CalderonZygmund { .. } => true,
            KernelForm::RoughHomogeneous { omega, .. } => matches!(omega, SphereFunction::Coordinate { .. }),
        }
    }

    /// K at offsets d1 = x − y1, d2 = x − y2.
    #[inline]
    pub fn eval(&self, d1: Point, d2: Point) -> f64 {
        let n = self.dim;
        match &self.form {
            KernelForm::Fractional => (norm(d1, n) + norm(d2, n)).powf(self.alpha - 2.0 * n as f64),
            KernelForm::RoughHomogeneous { omega, .. } => {
                let mut z = [0.0; 4];
                z[..n].copy_from_slice(&d1[..n]);
                z[n..2 * n].copy_from_slice(&d2[..n]);
                let r = z[..2 * n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let sig: Vec<f64> = z[..2 * n].iter().map(|v| v / r).collect();
                omega.eval(&sig) * r.powf(self.alpha - 2.0 * n as f64)
            }
            KernelForm::CalderonZygmund { .. } => {
                let r2: f64 = (0..n).map(|k| d1[k] * d1[k] + d2[k] * d2[k]).sum();
                let num: f64 = (0..n).map(|k| d1[k] + d2[k]).sum();
                num / r2.powf(n as f64 + 0.5)
            }
        }
    }

    /// C/(|d1| + |d2|)^{2n−α}.
    #[inline]
    pub fn majorant(&self, d1: Point, d2: Point) -> f64 {
        let n = self.dim;
        self.bound * (norm(d1, n) + norm(d2, n)).powf(self.alpha - 2.0 * n as f64)
    }

    /// ∫ of K over [−h/2, h/2]^{2n}; zero for α = 0, where the cell is excluded.
    pub fn singular_cell(&self, h: f64) -> f64 {
        if self.alpha > 0.0 {
            self.unit_cell * h.powf(self.alpha)
        } else {
            0.0
        }
    }

    pub fn singular_cell_majorant(&self, h: f64) -> f64 {
        if self.alpha > 0.0 {
            self.unit_cell_majorant * h.powf(self.alpha)
        } else {
            0.0
        }
    }

    /// Integral of a kernel homogeneous of degree α − 2n over [−1/2, 1/2]^{2n}:
    /// with J the integral over the shell between the cubes of side 1 and 1/2,
    /// the full cube gives J/(1 − 2^{−α}).
    fn cell_integral_unit<F: Fn(Point, Point) -> f64>(&self, k: F) -> f64 {
        let d = 2 * self.dim;
        let sub: usize = if d == 2 { 16 } else { 8 };
        let (gx, gw) = gauss_legendre(if d == 2 { 8 } else { 4 });
        let side = 1.0 / sub as f64;
        let inner = sub / 4;
        let total_cells = sub.pow(d as u32);
        let mut shell = 0.0;
        let mut idx = vec![0usize; d];
        for c in 0..total_cells {
            let mut rem = c;
            for slot in idx.iter_mut() {
                *slot = rem % sub;
                rem /= sub;
            }
            let in_core = idx.iter().all(|&i| i >= sub / 2 - inner && i < sub / 2 + inner);
            if in_core {
                continue;
            }
            let lo: Vec<f64> = idx.iter().map(|&i| -0.5 + i as f64 * side).collect();
            let npts = gx.len().pow(d as u32);
            for q in 0..npts {
                let mut r = q;
                let mut w = 1.0;
                let mut z = [0.0; 4];
                for a in 0..d {
                    let t = r % gx.len();
                    r /= gx.len();
                    z[a] = lo[a] + side * 0.5 * (gx[t] + 1.0);
                    w *= gw[t] * 0.5 * side;
                }
                let (d1, d2) = if d == 2 { ([z[0], 0.0], [z[1], 0.0]) } else { ([z[0], z[1]], [z[2], z[3]]) };
                shell += w * k(d1, d2);
            }
        }
        shell / (1.0 - 2f64.powf(-self.alpha))
    }

    /// max over random off-diagonal triples of |K|·(|x−y1| + |x−y2|)^{2n−α}.
    pub fn sampled_size_constant(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim;
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let d1 = random_point(&mut rng, n);
            let d2 = random_point(&mut rng, n);
            let s = norm(d1, n) + norm(d2, n);
            if s < 1e-9 {
                continue;
            }
            best = best.max(self.eval(d1, d2).abs() * s.powf(2.0 * n as f64 - self.alpha));
        }
        best
    }

    /// Smoothness constant sampled on admissible quadruples: moving one of
    /// x, y1, y2 by δ ≤ ½·max distance, the ratio
    /// |ΔK|·(|x−y1| + |x−y2|)^{2n+ε}/δ^ε.
    pub fn sampled_smoothness_constant(&self, samples: usize, seed: u64) -> Option<f64> {
        let eps = match self.form {
            KernelForm::CalderonZygmund { regularity } => regularity,
            _ => return None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim;
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let d1 = random_point(&mut rng, n);
            let d2 = random_point(&mut rng, n);
            let s = norm(d1, n) + norm(d2, n);
            if s < 1e-6 {
                continue;
            }
            let reach = 0.5 * norm(d1, n).max(norm(d2, n));
            let mut mv = random_point(&mut rng, n);
            let len = norm(mv, n);
            let delta = reach * rng.gen::<f64>();
            for a in 0..n {
                mv[a] *= delta / len;
            }
            let base = self.eval(d1, d2);
            let which = rng.gen_range(0..3);
            let moved = match which {
                // y1 → y1 + mv changes d1 by −mv
                0 => self.eval(sub(d1, mv), d2),
                1 => self.eval(d1, sub(d2, mv)),
                _ => self.eval(add(d1, mv), add(d2, mv)),
            };
            if delta > 0.0 {
                best = best.max((moved - base).abs() * s.powf(2.0 * n as f64 + eps) / delta.powf(eps));
            }
        }
        Some(best)
    }
}

#[inline]
pub(crate) fn norm(p: Point, n: usize) -> f64 {
    if n == 1 {
        p[0].abs()
    } else {
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Point {
    let mut p = [0.0; 2];
    for v in p.iter_mut().take(n) {
        *v = rng.gen_range(-2.0..2.0);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_unit_cell_matches_closed_form() {
        // ∫_{[-1/2,1/2]²} (|u|+|v|)^{-1} = 4 ln 2
        let k = BilinearKernel::fractional(1, 1.0).unwrap();
        assert!((k.singular_cell(1.0) - 4.0 * 2f64.ln()).abs() < 1e-6, "{}", k.singular_cell(1.0));
        // general β = α − 2: 4(2^{β+2} − 2)a^{β+2}/((β+1)(β+2)), a = 1/2
        let k = BilinearKernel::fractional(1, 1.5).unwrap();
        let beta: f64 = -0.5;
        let exact = 4.0 * (2f64.powf(beta + 2.0) - 2.0) * 0.5f64.powf(beta + 2.0) / ((beta + 1.0) * (beta + 2.0));
        assert!((k.singular_cell(1.0) - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn odd_omega_is_mean_zero_and_constant_is_not() {
        assert!(sphere_integral(&SphereFunction::Coordinate { index: 0 }, 2).abs() < 1e-12);
        assert!(sphere_integral(&SphereFunction::Coordinate { index: 3 }, 4).abs() < 1e-10);
        let c = sphere_integral(&SphereFunction::Constant { value: 1.0 }, 4);
        assert!((c - 2.0 * PI * PI).abs() < 1e-8, "{c}");
        assert!(BilinearKernel::rough(1, 0.0, SphereFunction::Constant { value: 1.0 }, true).is_err());
    }

    #[test]
    fn sampled_constants_respect_declared_bound() {
        for k in [
            BilinearKernel::fractional(1, 1.0).unwrap(),
            BilinearKernel::calderon_zygmund(1).unwrap(),
            BilinearKernel::calderon_zygmund(2).unwrap(),
            BilinearKernel::rough(2, 0.0, SphereFunction::Coordinate { index: 1 }, true).unwrap(),
        ] {
            assert!(k.sampled_size_constant(2000, 7) <= k.bound() * (1.0 + 1e-12));
        }
        let cz = BilinearKernel::calderon_zygmund(1).unwrap();
        assert!(cz.sampled_smoothness_constant(2000, 3).unwrap().is_finite());
    }
}
