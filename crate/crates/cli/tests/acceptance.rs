//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p morrey-cli --test acceptance`.

use std::collections::BTreeMap;
use std::time::Instant;

use morrey_cli::runner::{self, Outcome};
use morrey_cli::{LabConfig, Overrides};
use morrey_core::exponents::{harmonic_mean_exponent, luxemburg_norm, ExponentFunction};
use morrey_core::operators::{
    bilinear_commutator, bilinear_principal, extended_bilinear, truncated_bilinear, BilinearKernel, ExtendedOptions, Slot,
    SphereFunction, Truncation,
};
use morrey_core::spaces::BaseSpace;
use morrey_core::verify::{FunctionSpec, Verdict};
use morrey_core::weights::{w_class_check, ProfileLattice, WeightProfile};
use morrey_core::{Ball, Cube, Grid, GridFunction, Region};

type Outcomes = BTreeMap<String, Outcome>;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: impl Into<String>) -> Line {
    Line { pass, detail: detail.into() }
}

fn configs_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs the named experiments of a config file, keyed by id.
fn run_config(file: &str, ids: Option<&[&str]>) -> (Outcomes, f64) {
    let path = configs_dir().join(file);
    let cfg = LabConfig::load(path.to_str().unwrap()).expect("config loads");
    let plan: Vec<_> = cfg
        .plan(&Overrides::default())
        .expect("config plans")
        .into_iter()
        .filter(|p| ids.is_none_or(|ids| ids.contains(&p.id.as_str())))
        .collect();
    let t = Instant::now();
    let out = runner::execute(plan);
    let wall = t.elapsed().as_secs_f64();
    (out.into_iter().map(|o| (o.report.id.clone(), o)).collect(), wall)
}

fn verdict(o: &Outcomes, id: &str) -> Verdict {
    o.get(id).map_or(Verdict::Inconclusive, |x| x.report.verdict)
}

fn check_value(o: &Outcomes, id: &str, name: &str) -> Option<f64> {
    o.get(id)?.report.checks.iter().find(|c| c.name == name).map(|c| c.value)
}

fn all_pass(o: &Outcomes, ids: &[&str]) -> (bool, String) {
    let bad: Vec<&str> = ids.iter().copied().filter(|id| verdict(o, id) != Verdict::Pass).collect();
    (bad.is_empty(), if bad.is_empty() { format!("{} experiments pass", ids.len()) } else { format!("failing: {}", bad.join(", ")) })
}

fn golden_ratio() -> Line {
    let t = Instant::now();
    let h = 1.0 / 512.0;
    // Cell faces at 0, 1 and 2 so the jumps of χ and p are resolved exactly.
    let grid = Grid::line(-1.0 - 0.5 * h, 3.0 + 0.5 * h, h).unwrap();
    let f = GridFunction::indicator(&grid, &Region::Cube(Cube::interval(0.0, 2.0).unwrap()));
    let p = ExponentFunction::from_fn(&grid, |x| if x[0] < 1.0 { 1.0 } else { 2.0 }).unwrap();
    let v = luxemburg_norm(&f, &p).unwrap();
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let secs = t.elapsed().as_secs_f64();
    line((v - phi).abs() <= 1e-4 && secs < 1.0, format!("norm {v:.9}, golden ratio {phi:.9}, {secs:.3}s"))
}

fn indicator_band(h: f64) -> f64 {
    let grid = Grid::line(-8.0, 8.0, h).unwrap();
    let p = ExponentFunction::from_fn(&grid, |x| 2.0 + 1.0 / (std::f64::consts::E + x[0].abs()).ln()).unwrap();
    let space = BaseSpace::variable(p.clone());
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for c in [0.0, 0.7, -2.3] {
        for k in -4..=2 {
            let q = Cube::on_line(c, 2f64.powi(k)).unwrap();
            let norm = space.norm_of_indicator(&grid, &Region::Cube(q)).unwrap();
            let pq = harmonic_mean_exponent(&p, &q).unwrap();
            let r = norm / q.side.powf(1.0 / pq);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    hi.max(1.0 / lo)
}

fn indicator_scaling() -> Line {
    let (c1, c2) = (indicator_band(1.0 / 256.0), indicator_band(1.0 / 512.0));
    let drift = (c1 - c2).abs() / c2;
    line(c1.is_finite() && drift < 0.10, format!("band constant {c1:.5} at h, {c2:.5} at h/2, drift {:.3}%", 100.0 * drift))
}

fn extension_matches_truncation() -> Line {
    let h = 1.0 / 64.0;
    let grid = Grid::line(-2.0, 2.0, h).unwrap();
    let ball = Ball::on_line(0.1, 0.5).unwrap();
    let f = grid.sample(|x| (1.0 - ((x[0] - 0.2) / 0.7).powi(2)).max(0.0).powi(2)).unwrap();
    let g = grid.sample(|x| if (-0.6..=0.8).contains(&x[0]) { 1.0 + x[0] } else { 0.0 }).unwrap();
    let kernels = [
        BilinearKernel::fractional(1, 1.0).unwrap(),
        BilinearKernel::rough(1, 0.5, SphereFunction::Coordinate { index: 0 }, true).unwrap(),
    ];
    let mut worst = 0.0f64;
    for k in &kernels {
        for x0 in [-0.3, 0.0, 0.1, 0.25, 0.5] {
            let x = grid.nearest_node([x0, 0.0]).unwrap();
            let ext = extended_bilinear(&f, &g, k, &ball, x, ExtendedOptions::default()).unwrap();
            let tr = truncated_bilinear(&f, &g, k, h, Truncation::JointBall, x).unwrap();
            worst = worst.max((ext - tr).abs());
        }
    }
    line(worst <= 1e-9, format!("max difference {worst:.3e} over 10 evaluations"))
}

fn fractional_constant() -> Line {
    let h = 1.0 / 256.0;
    let grid = Grid::line(-2.0, 2.0, h).unwrap();
    let c = grid.sample(|x| if x[0].abs() < 1.0 - 1e-12 { 1.0 } else if x[0].abs() <= 1.0 + 1e-12 { 0.5 } else { 0.0 }).unwrap();
    let x = grid.node_at([0.0, 0.0]).unwrap();
    let k = BilinearKernel::fractional(1, 1.0).unwrap();
    let v = bilinear_principal(&c, &c, &k, x).unwrap();
    let exact = 8.0 * 2f64.ln();
    let rel = (v - exact).abs() / exact;
    line(rel <= 0.01, format!("value {v:.6}, exact {exact:.6}, relative error {:.3}%", 100.0 * rel))
}

fn profile_series() -> Line {
    let grid = Grid::line(-4.0, 4.0, 1.0 / 64.0).unwrap();
    let lattice = ProfileLattice { grid, centers: vec![[0.0, 0.0]], r0: 1.0 / 16.0, levels: 16 };
    let u = WeightProfile::Power { c: 1.0, lambda: 0.25 };
    let x = BaseSpace::lebesgue(2.0).unwrap();
    let ok = w_class_check(&u, &x, 0.0, false, &lattice).unwrap();
    let bad = w_class_check(&u, &x, 0.5, false, &lattice).unwrap();
    let s = &bad.series_partial_sums;
    let growth = if s.len() >= 16 { s[15] / s[7] } else { f64::NAN };
    let pass = ok.verdict == Verdict::Pass && ok.series_last_term_ratio < 1.0 && bad.verdict == Verdict::Fail && growth >= 2.0;
    line(
        pass,
        format!(
            "order 0: {:?}, last-term ratio {:.4}; order 1/2: {:?}, S_16/S_8 = {growth:.3}",
            ok.verdict, ok.series_last_term_ratio, bad.verdict
        ),
    )
}

fn commutator_identity() -> Line {
    let h = 1.0 / 32.0;
    let grid = Grid::line(-1.0, 1.0, h).unwrap();
    let kernels = [
        BilinearKernel::fractional(1, 1.0).unwrap(),
        BilinearKernel::rough(1, 0.0, SphereFunction::Coordinate { index: 0 }, true).unwrap(),
        BilinearKernel::calderon_zygmund(1).unwrap(),
    ];
    let bumps = |seed: u64| {
        FunctionSpec::RandomBumps { seed, count: 4, radius: 0.4, lo: vec![-0.8], hi: vec![0.8] }.sample(&grid).unwrap()
    };
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let (b, f, g) = (bumps(3 * i + 1), bumps(3 * i + 2), bumps(3 * i + 3));
        let k = &kernels[(i % 3) as usize];
        let slot = if i % 2 == 0 { Slot::First } else { Slot::Second };
        let mode = if i % 5 < 3 { Truncation::JointBall } else { Truncation::Product };
        let eps = h * (1 + i % 4) as f64;
        let x = (i as usize * 37 + 11) % grid.len();
        let v = bilinear_commutator(&b, slot, &f, &g, k, eps, mode, x).unwrap();
        worst = worst.max((v.kernel_form - v.split_form).abs() / v.kernel_form.abs().max(1.0));
    }
    line(worst <= 1e-10, format!("100 seeded configurations, max discrepancy {worst:.3e}"))
}

fn main() {
    let start = Instant::now();
    let mut lines: Vec<(u32, &str, Line)> = Vec::new();

    lines.push((1, "variable Luxemburg norm of a two-piece indicator", golden_ratio()));

    let sandwich = ["sandwich-lebesgue", "sandwich-weighted", "sandwich-variable"];
    let (o, secs) = run_config("acceptance.toml", Some(&sandwich));
    let (ok, d) = all_pass(&o, &sandwich);
    lines.push((2, "indicator duality sandwich", line(ok && secs < 10.0, format!("{d}, {secs:.2}s"))));

    lines.push((3, "indicator norm against the harmonic-mean exponent", indicator_scaling()));

    let (o, secs) = run_config("acceptance.toml", Some(&["ball-independence"]));
    let gaps = ["max gap at h", "max gap at h/2"].map(|n| check_value(&o, "ball-independence", n));
    lines.push((
        4,
        "extended operator independent of the ball",
        line(verdict(&o, "ball-independence") == Verdict::Pass && secs < 60.0, format!("gaps {gaps:?}, {secs:.2}s")),
    ));

    lines.push((5, "extension equals the finest truncation for local data", extension_matches_truncation()));
    lines.push((6, "fractional integral of indicators at the centre", fractional_constant()));

    let rest = [
        "averaging-lebesgue",
        "averaging-weighted",
        "bmo-growth",
        "bmo-plateau",
        "truncation-fractional",
        "truncation-rough",
    ];
    let (acc, _) = run_config("acceptance.toml", Some(&rest));
    let (ok, d) = all_pass(&acc, &rest[..2]);
    lines.push((7, "averaging operator norm against the closed form", line(ok, d)));

    let (ok, d) = all_pass(&acc, &rest[2..4]);
    let growth = check_value(&acc, "bmo-growth", "minimal relative growth between levels");
    let spread = check_value(&acc, "bmo-plateau", "plateau spread");
    let factor = ["bmo-growth", "bmo-plateau"].map(|id| check_value(&acc, id, "oscillation factor").unwrap_or(f64::INFINITY));
    let ok = ok && factor.iter().all(|f| *f <= 2.0 + 1e-6) && spread.is_some_and(|s| s <= 0.15);
    lines.push((
        8,
        "commutator growth for BMO symbols",
        line(ok, format!("{d}; growth {growth:?}, plateau spread {spread:?}, oscillation factors {factor:?}")),
    ));

    let (neg, neg_secs) = run_config("negative_controls.toml", None);
    let (ok, d) = all_pass(&acc, &rest[4..]);
    let control = verdict(&neg, "truncation-not-mean-zero");
    lines.push((9, "truncation ladder converges", line(ok && control == Verdict::Fail, format!("{d}; control {control:?}"))));

    lines.push((10, "profile tail series", profile_series()));
    lines.push((11, "commutator kernel form equals split form", commutator_identity()));

    let passing: Vec<&str> = neg.values().filter(|o| !o.failed()).map(|o| o.report.id.as_str()).collect();
    let total = start.elapsed().as_secs_f64();
    lines.push((
        12,
        "negative controls fail",
        line(
            passing.is_empty() && !neg.is_empty() && total < 900.0,
            format!("{} of {} fail ({neg_secs:.2}s); suite total {total:.1}s", neg.len() - passing.len(), neg.len()),
        ),
    ));

    let mut failed = 0;
    for (n, title, l) in &lines {
        failed += usize::from(!l.pass);
        println!("criterion {n:>2} {} {title}: {}", if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    println!("{} of {} criteria pass", lines.len() - failed, lines.len());
    std::process::exit(failed as i32);
}
