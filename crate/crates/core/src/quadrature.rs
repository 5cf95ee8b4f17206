//! Gauss–Legendre rules and a few closed-form integrals of |x|^e used for
//! singular cells.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// ∫_a^b f with an n-point Gauss rule.
pub fn gauss_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// ∫_lo^hi |t − c|^e dt; infinite when e ≤ −1 and c ∈ [lo, hi].
pub fn abs_power_integral(lo: f64, hi: f64, c: f64, e: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let u = lo - c;
    let v = hi - c;
    if e == 0.0 {
        return v - u;
    }
    let crosses = u <= 0.0 && v >= 0.0;
    if crosses && e <= -1.0 {
        return f64::INFINITY;
    }
    if e == -1.0 {
        return if u > 0.0 { (v / u).ln() } else { (u / v).ln() };
    }
    let anti = |t: f64| t.signum() * t.abs().powf(e + 1.0) / (e + 1.0);
    anti(v) - anti(u)
}

/// ∫ over [0,a]×[0,b] of |x|^e in the plane, for e > −2, via the two
/// triangles split by the diagonal in polar coordinates.
fn corner_power_integral(a: f64, b: f64, e: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let k = e + 2.0;
    let t1 = (b / a).atan();
    let first = gauss_integrate(|t: f64| (a / t.cos()).powf(k), 0.0, t1, 24);
    let second = gauss_integrate(|t: f64| (b / t.sin()).powf(k), t1, 0.5 * PI, 24);
    (first + second) / k
}

/// ∫ over the rectangle [lo, hi] ⊂ R² of |x − c|^e, for a rectangle that
/// contains c in its closure and e > −2.
pub fn rect_power_integral(lo: [f64; 2], hi: [f64; 2], c: [f64; 2], e: f64) -> f64 {
    if e <= -2.0 {
        return f64::INFINITY;
    }
    let xs = [(c[0] - lo[0]).max(0.0), (hi[0] - c[0]).max(0.0)];
    let ys = [(c[1] - lo[1]).max(0.0), (hi[1] - c[1]).max(0.0)];
    let mut s = 0.0;
    for a in xs {
        for b in ys {
            s += corner_power_integral(a, b, e);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let v = gauss_integrate(|x| x.powi(9) + 3.0 * x * x, -1.0, 2.0, 5);
        let exact = (2f64.powi(10) - 1.0) / 10.0 + (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn rect_power_integral_matches_square_area_for_zero_exponent() {
        let v = rect_power_integral([-0.5, -0.25], [0.5, 0.75], [0.0, 0.0], 0.0);
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn corner_integral_of_inverse_distance() {
        // ∫_{[0,1]²} |x|^{-1} dx = 2·ln(1+√2)
        let v = corner_power_integral(1.0, 1.0, -1.0);
        let exact = 2.0 * (1.0 + 2f64.sqrt()).ln();
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }
}
