use morrey_core::exponents::{
    dual_exponent, harmonic_mean_exponent, luxemburg_norm, luxemburg_trace, modular, ExponentFunction,
};
use morrey_core::families::cube_family;
use morrey_core::geometry::{integrate, restrict};
use morrey_core::operators::{
    bilinear_commutator, truncated_bilinear, truncated_majorant, BilinearKernel, Slot, SphereFunction, Truncation,
};
use morrey_core::spaces::{morrey_norm_over, BaseSpace};
use morrey_core::verify::{Check, ExperimentReport, FunctionSpec, Verdict};
use morrey_core::weights::{ap_constant, multiple_weight_constant, Weight, WeightProfile};
use morrey_core::{Ball, Cube, Grid, GridFunction, Region};
use proptest::prelude::*;

fn line() -> Grid {
    Grid::line(-1.0, 1.0, 1.0 / 32.0).unwrap()
}

fn bumps(grid: &Grid, seed: u64) -> GridFunction {
    FunctionSpec::RandomBumps { seed, count: 3, radius: 0.5, lo: vec![-0.7], hi: vec![0.7] }.sample(grid).unwrap()
}

fn kernel(which: u8) -> BilinearKernel {
    match which % 3 {
        0 => BilinearKernel::fractional(1, 1.0).unwrap(),
        1 => BilinearKernel::rough(1, 0.0, SphereFunction::Coordinate { index: 0 }, true).unwrap(),
        _ => BilinearKernel::calderon_zygmund(1).unwrap(),
    }
}

/// One of three base spaces on the line, chosen by `which`.
fn space(grid: &Grid, which: u8, p: f64) -> BaseSpace {
    match which % 3 {
        0 => BaseSpace::lebesgue(p).unwrap(),
        1 => BaseSpace::weighted(p, Weight::power(grid, 0.4, [0.0, 0.0]).unwrap()).unwrap(),
        _ => BaseSpace::variable(ExponentFunction::from_fn(grid, |x| p + 0.5 * x[0].abs()).unwrap()),
    }
}

fn pairing(f: &GridFunction, g: &GridFunction) -> f64 {
    f.grid().pieces(&Region::Whole).iter().map(|pc| pc.measure * (f.value(pc.node) * g.value(pc.node)).abs()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn commutator_kernel_form_matches_split_form(
        seed in 0u64..10_000, which in 0u8..3, first in any::<bool>(), joint in any::<bool>(),
        eps_cells in 1u32..5, x in 0usize..65,
    ) {
        let grid = line();
        let (b, f, g) = (bumps(&grid, seed), bumps(&grid, seed + 1), bumps(&grid, seed + 2));
        let slot = if first { Slot::First } else { Slot::Second };
        let mode = if joint { Truncation::JointBall } else { Truncation::Product };
        let v = bilinear_commutator(&b, slot, &f, &g, &kernel(which), eps_cells as f64 * grid.h(), mode, x).unwrap();
        prop_assert!((v.kernel_form - v.split_form).abs() <= 1e-10 * v.kernel_form.abs().max(1.0));
    }

    #[test]
    fn commutator_vanishes_for_constant_symbol(seed in 0u64..10_000, which in 0u8..3, x in 0usize..65, c in -3.0f64..3.0) {
        let grid = line();
        let b = grid.sample(|_| c).unwrap();
        let v = bilinear_commutator(&b, Slot::First, &bumps(&grid, seed), &bumps(&grid, seed + 1), &kernel(which), grid.h(), Truncation::JointBall, x).unwrap();
        prop_assert!(v.kernel_form.abs() <= 1e-12);
    }

    #[test]
    fn positive_truncations_shrink_as_eps_grows(seed in 0u64..10_000, x in 0usize..65, e1 in 1u32..4, extra in 1u32..4) {
        let grid = line();
        let f = bumps(&grid, seed).abs();
        let g = bumps(&grid, seed + 7).abs();
        let k = kernel(0);
        let small = truncated_bilinear(&f, &g, &k, e1 as f64 * grid.h(), Truncation::JointBall, x).unwrap();
        let large = truncated_bilinear(&f, &g, &k, (e1 + extra) as f64 * grid.h(), Truncation::JointBall, x).unwrap();
        prop_assert!(large <= small + 1e-12);
    }

    #[test]
    fn norms_satisfy_the_function_space_axioms(seed in 0u64..10_000, which in 0u8..3, p in 1.0f64..4.0, c in -5.0f64..5.0) {
        let grid = line();
        let x = space(&grid, which, p);
        let (f, g) = (bumps(&grid, seed), bumps(&grid, seed + 3));
        let (nf, ng) = (x.norm(&f).unwrap(), x.norm(&g).unwrap());
        let tol = 1e-8 * (nf + ng).max(1.0);
        prop_assert!(x.norm(&f.add(&g).unwrap()).unwrap() <= nf + ng + tol);
        prop_assert!((x.norm(&f.scaled(c)).unwrap() - c.abs() * nf).abs() <= tol * c.abs().max(1.0));
        prop_assert!((x.norm(&f.abs()).unwrap() - nf).abs() <= tol);
        let smaller = f.zip_map(&g, |a, b| if a.abs() <= b.abs() { a } else { 0.0 }).unwrap();
        prop_assert!(x.norm(&smaller).unwrap() <= x.norm(&f.abs().zip_map(&g.abs(), f64::max).unwrap()).unwrap() + tol);
        prop_assert!(x.norm(&grid.sample(|_| 0.0).unwrap()).unwrap() == 0.0);
    }

    #[test]
    fn holder_inequality_with_the_associate_norm(seed in 0u64..10_000, which in 0u8..3, p in 1.2f64..4.0) {
        let grid = line();
        let x = space(&grid, which, p);
        let (f, g) = (bumps(&grid, seed), bumps(&grid, seed + 5));
        let bound = x.norm(&f).unwrap() * x.associate_norm(&g).unwrap();
        prop_assert!(pairing(&f, &g) <= bound * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn indicator_sandwich_lower_bound(which in 0u8..3, p in 1.2f64..4.0, c in -0.5f64..0.5, side in 0.1f64..0.9) {
        let grid = line();
        let x = space(&grid, which, p);
        let q = Region::Cube(Cube::on_line(c, side).unwrap());
        let measure: f64 = grid.pieces(&q).iter().map(|pc| pc.measure).sum();
        let prod = x.norm_of_indicator(&grid, &q).unwrap() * x.associate_norm_of_indicator(&grid, &q).unwrap();
        prop_assert!(prod >= measure * (1.0 - 1e-6));
    }

    #[test]
    fn luxemburg_norm_is_homogeneous_and_matches_constant_exponents(seed in 0u64..10_000, p in 1.0f64..5.0, c in 0.1f64..10.0) {
        let grid = line();
        let f = bumps(&grid, seed);
        let pf = ExponentFunction::constant(&grid, p).unwrap();
        let lux = luxemburg_norm(&f, &pf).unwrap();
        let lp = BaseSpace::lebesgue(p).unwrap().norm(&f).unwrap();
        prop_assert!((lux - lp).abs() <= 1e-6 * lp.max(1e-12));
        let scaled = luxemburg_norm(&f.scaled(c), &pf).unwrap();
        prop_assert!((scaled - c * lux).abs() <= 1e-6 * (c * lux).max(1e-12));
    }

    #[test]
    fn harmonic_mean_exponent_lies_between_extremes(a in 1.0f64..3.0, slope in -2.0f64..2.0, c in -0.5f64..0.5, side in 0.05f64..0.9) {
        let grid = line();
        let p = ExponentFunction::from_fn(&grid, |x| a + slope.abs() * (1.0 + x[0] * slope.signum())).unwrap();
        let q = Cube::on_line(c, side).unwrap();
        let pq = harmonic_mean_exponent(&p, &q).unwrap();
        let vals: Vec<f64> = grid.pieces(&Region::Cube(q)).iter().map(|pc| p.value(pc.node)).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        prop_assert!(pq >= lo - 1e-12 && pq <= hi + 1e-12);
    }

    #[test]
    fn verdict_is_recomputed_from_the_table(
        ratios in prop::collection::vec(0.0f64..2.0, 0..6),
        threshold in prop::option::of(0.5f64..1.5),
        checks in prop::collection::vec((0.0f64..2.0, 0.5f64..1.5, any::<bool>()), 0..4),
        ladder in prop::collection::vec(0.0f64..1.0, 0..4),
    ) {
        let mut r = ExperimentReport::new("t", "property", serde_json::Value::Null);
        for (i, m) in ratios.iter().enumerate() {
            r.row(format!("row{i}"), *m, 1.0);
        }
        r.row_threshold = threshold;
        for (i, (v, t, upper)) in checks.iter().enumerate() {
            let name = format!("c{i}");
            r.check(if *upper { Check::at_most(&name, *v, *t) } else { Check::at_least(&name, *v, *t) });
        }
        for (i, hl) in ladder.iter().enumerate() {
            r.step(2f64.powi(-(i as i32)), *hl);
        }
        let r = r.finish();
        let back: ExperimentReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back.recompute_verdict(), r.verdict);
        if r.verdict == Verdict::Pass {
            prop_assert!(r.failed_checks().is_empty());
        }
        if !r.failed_checks().is_empty() {
            prop_assert_eq!(r.verdict, Verdict::Fail);
        }
    }

    #[test]
    fn restriction_partitions_and_integrals_add(seed in 0u64..10_000, a in -0.9f64..0.0, b in 0.0f64..0.9) {
        let grid = line();
        let f = bumps(&grid, seed);
        let r = Region::Cube(Cube::interval(a, b).unwrap());
        let sum = restrict(&f, &r, false).add(&restrict(&f, &r, true)).unwrap();
        prop_assert!(sum.values().iter().zip(f.values()).all(|(x, y)| x == y));
        let whole = Region::Cube(Cube::interval(-1.0, 1.0).unwrap());
        let parts = [(-1.0, a), (a, b), (b, 1.0)];
        let split: f64 = parts.iter().map(|&(l, u)| integrate(&f, &Region::Cube(Cube::interval(l, u).unwrap()))).sum();
        prop_assert!((integrate(&f, &whole) - split).abs() <= 1e-10);
    }

    #[test]
    fn luxemburg_norm_sits_on_the_unit_modular(seed in 0u64..10_000, a in 1.0f64..3.0, slope in 0.0f64..2.0) {
        let grid = line();
        let f = bumps(&grid, seed);
        let p = ExponentFunction::from_fn(&grid, |x| a + slope * x[0].abs()).unwrap();
        let (norm, trace) = luxemburg_trace(&f, &p).unwrap();
        prop_assume!(norm > 1e-9);
        let m = modular(&f.scaled(1.0 / norm), &p).unwrap();
        prop_assert!((m - 1.0).abs() <= 1e-6);
        let mut steps = trace.clone();
        steps.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
        prop_assert!(steps.windows(2).all(|w| w[1].modular <= w[0].modular));
        let back = dual_exponent(&dual_exponent(&p));
        prop_assert!(back.values().iter().zip(p.values()).all(|(x, y)| (x - y).abs() <= 1e-12 * y));
    }

    #[test]
    fn ap_constant_is_at_least_one_and_scale_free(a in -0.5f64..0.45, p in 1.5f64..4.0, c in 0.1f64..10.0) {
        let grid = line();
        let cubes = cube_family(&grid, 8, &[0.125, 0.25, 0.5, 1.0]);
        let w = Weight::power(&grid, a, [0.0, 0.0]).unwrap();
        let cw = Weight::scaled_power(&grid, c, a, [0.0, 0.0]).unwrap();
        let (v, vc) = (ap_constant(&w, p, &cubes).unwrap().value, ap_constant(&cw, p, &cubes).unwrap().value);
        prop_assert!(v >= 1.0 - 1e-9);
        prop_assert!((v - vc).abs() <= 1e-9 * v);
    }

    #[test]
    fn constant_weights_have_unit_multiple_constant(p1 in 1.2f64..5.0, p2 in 1.2f64..5.0) {
        let grid = line();
        let cubes = cube_family(&grid, 8, &[0.125, 0.5, 1.0]);
        let one = Weight::new(grid.sample(|_| 1.0).unwrap()).unwrap();
        let m = multiple_weight_constant(&one, &one, p1, p2, None, &cubes).unwrap();
        prop_assert!(m.per_region.iter().all(|v| (v - 1.0).abs() <= 1e-9));
    }

    #[test]
    fn truncations_are_bilinear_and_dominated(seed in 0u64..10_000, which in 0u8..3, x in 0usize..65, a in -3.0f64..3.0) {
        let grid = line();
        let (f1, f2, g) = (bumps(&grid, seed), bumps(&grid, seed + 1), bumps(&grid, seed + 2));
        let k = kernel(which);
        let eps = 2.0 * grid.h();
        let t = |f: &GridFunction, g: &GridFunction| truncated_bilinear(f, g, &k, eps, Truncation::JointBall, x).unwrap();
        let mix = f1.scaled(a).add(&f2).unwrap();
        let lhs = t(&mix, &g);
        let rhs = a * t(&f1, &g) + t(&f2, &g);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        let lhs2 = t(&g, &mix);
        let rhs2 = a * t(&g, &f1) + t(&g, &f2);
        prop_assert!((lhs2 - rhs2).abs() <= 1e-10 * lhs2.abs().max(1.0));
        let dom = truncated_majorant(&f1, &g, &k, eps, Truncation::JointBall, x).unwrap();
        prop_assert!(t(&f1, &g).abs() <= dom * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn morrey_norm_grows_with_the_ball_family(seed in 0u64..10_000, which in 0u8..3, extra in 1usize..4) {
        let grid = line();
        let x = space(&grid, which, 2.0);
        let f = bumps(&grid, seed);
        let u = WeightProfile::Power { c: 1.0, lambda: 0.25 };
        let balls: Vec<Ball> = [(0.0, 0.25), (0.3, 0.125), (-0.4, 0.5), (0.1, 0.75)]
            .iter()
            .map(|&(c, r)| Ball::on_line(c, r).unwrap())
            .collect();
        let small = morrey_norm_over(&f, &x, &u, &balls[..1]).unwrap().value;
        let large = morrey_norm_over(&f, &x, &u, &balls[..=extra]).unwrap().value;
        prop_assert!(large >= small);
    }
}
