//! Experiments on base spaces: Hölder pairing, indicator duality, the
//! characteristic condition, the function-space axioms, the sharp-maximal
//! inequality, and the Morrey profile class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::specs::{point, require, FamilySpec, FunctionSpec, GridSpec, PairSpec, ProfileSpec, SpaceSpec};
use super::{drift, max_of, min_of, resolution_pair, Check, ExperimentReport, IDENTITY_TOL, STABILITY};
use crate::error::Result;
use crate::exponents::luxemburg_norm;
use crate::geometry::{integrate, Ball, Cube, Grid, GridFunction, Region};
use crate::operators::sharp_maximal;
use crate::spaces::BaseSpace;
use crate::weights::{w_class_check, ProfileLattice};

fn echo<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn identity_tol() -> f64 {
    IDENTITY_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderConfig {
    pub grid: GridSpec,
    pub space: SpaceSpec,
    pub pairs: Vec<PairSpec>,
    /// Measure g in this space instead of the associate space (negative control).
    #[serde(default)]
    pub dual_override: Option<SpaceSpec>,
    #[serde(default = "identity_tol")]
    pub tolerance: f64,
}

/// ∫|fg| / (‖f‖_X‖g‖_{X′}) over the pairs, at h and h/2.
pub fn holder_check(id: &str, cfg: &HolderConfig) -> Result<ExperimentReport> {
    require(!cfg.pairs.is_empty(), "holder_check needs at least one pair")?;
    let mut rep = ExperimentReport::new(id, "holder_check", echo(cfg));
    rep.row_threshold = Some(1.0 + cfg.tolerance);
    let base = cfg.grid.build()?;
    for (level, grid) in resolution_pair(&base).iter().enumerate() {
        let x = cfg.space.build(grid)?;
        let other = cfg.dual_override.as_ref().map(|s| s.build(grid)).transpose()?;
        let results: Vec<Result<Option<(String, f64, f64)>>> = cfg
            .pairs
            .par_iter()
            .map(|pair| {
                let f = pair.f.sample(grid)?;
                let g = pair.g.sample(grid)?;
                let nf = x.norm(&f)?;
                let ng = match &other {
                    Some(o) => o.norm(&g)?,
                    None => x.associate_norm(&g)?,
                };
                if nf == 0.0 || ng == 0.0 {
                    return Ok(None);
                }
                let pairing = integrate(&f.mul(&g)?.abs(), &Region::Whole);
                Ok(Some((pair.label(), pairing, nf * ng)))
            })
            .collect();
        let mut headline = f64::NEG_INFINITY;
        for r in results {
            match r? {
                Some((label, m, b)) => {
                    headline = headline.max(m / b);
                    if level == 0 {
                        rep.row(label, m, b);
                    }
                }
                None if level == 0 => rep.note("zero-norm pair skipped"),
                None => {}
            }
        }
        rep.step(grid.h(), headline);
    }
    rep.headline = rep.ladder[0].headline;
    if cfg.dual_override.is_some() {
        rep.note("g measured outside the associate space");
    }
    Ok(rep.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChiDualityConfig {
    pub grid: GridSpec,
    pub space: SpaceSpec,
    pub family: FamilySpec,
    #[serde(default = "identity_tol")]
    pub tolerance: f64,
}

fn chi_products(x: &BaseSpace, grid: &Grid, balls: &[Ball]) -> Result<Vec<f64>> {
    balls
        .par_iter()
        .map(|b| {
            let r = Region::Ball(*b);
            let a = x.norm_of_indicator(grid, &r)?;
            let c = x.associate_norm_of_indicator(grid, &r)?;
            Ok(a * c / grid.measure(&r))
        })
        .collect()
}

/// s(B) = ‖χ_B‖_X‖χ_B‖_{X′}/|B|; the lower bound 1 is Hölder's inequality,
/// the upper bound must be stable under refinement and family extension.
pub fn chi_duality_check(id: &str, cfg: &ChiDualityConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new(id, "chi_duality_check", echo(cfg));
    let base = cfg.grid.build()?;
    let family = cfg.family.build(&base)?;
    let rmin = min_of(family.radii.iter().copied());
    let rmax = max_of(family.radii.iter().copied());
    require(rmax / rmin >= 8.0 - 1e-9, "chi_duality_check needs radii spanning at least three dyadic steps")?;
    let balls = family.balls();
    let mut min_s = f64::INFINITY;
    for (level, grid) in resolution_pair(&base).iter().enumerate() {
        let x = cfg.space.build(grid)?;
        let s = chi_products(&x, grid, &balls)?;
        if level == 0 {
            for (b, v) in balls.iter().zip(&s) {
                rep.row(format!("B({:?},{})", &b.center[..grid.dim()], b.radius), *v, 1.0);
            }
        }
        min_s = min_s.min(min_of(s.iter().copied()));
        rep.step(grid.h(), max_of(s));
    }
    let x = cfg.space.build(&base)?;
    let extended = chi_products(&x, &base, &family.extended().balls())?;
    let ext_max = max_of(extended);
    rep.headline = rep.ladder[0].headline;
    rep.check(Check::at_least("min s(B)", min_s, 1.0 - cfg.tolerance));
    rep.check(Check::at_most("refinement drift of max s(B)", drift(rep.ladder[0].headline, rep.ladder[1].headline), STABILITY));
    rep.check(Check::at_most("extension drift of max s(B)", drift(rep.headline, ext_max), STABILITY));
    Ok(rep.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionForm {
    /// |B|^{α/n}‖χ_B‖_Y‖χ_B‖_{X1′}‖χ_B‖_{X2′} against |B|².
    Ball,
    /// ‖χ_Q‖_Y‖χ_Q‖_{X1′}‖χ_Q‖_{X2′} against |Q|^{2−α/n}.
    Cube,
    /// |B|^{α/n}‖χ_B‖_Y‖χ_B‖_{X1′} against |B|.
    Linear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharacteristicConfig {
    pub grid: GridSpec,
    pub x1: SpaceSpec,
    #[serde(default)]
    pub x2: Option<SpaceSpec>,
    pub y: SpaceSpec,
    pub alpha: f64,
    pub form: ConditionForm,
    pub centers: Vec<Vec<f64>>,
    /// Radii for balls, sides for cubes; at least three.
    pub scales: Vec<f64>,
}

/// Ratio of the characteristic product to its bound, per region.
pub(crate) fn characteristic_ratio(
    grid: &Grid,
    x1: &BaseSpace,
    x2: Option<&BaseSpace>,
    y: &BaseSpace,
    alpha: f64,
    form: ConditionForm,
    region: &Region,
) -> Result<(f64, f64)> {
    let n = grid.dim() as f64;
    let vol = grid.measure(region);
    let ny = y.norm_of_indicator(grid, region)?;
    let n1 = x1.associate_norm_of_indicator(grid, region)?;
    let n2 = match x2 {
        Some(x2) => x2.associate_norm_of_indicator(grid, region)?,
        None => 1.0,
    };
    Ok(match form {
        ConditionForm::Ball => (vol.powf(alpha / n) * ny * n1 * n2, vol * vol),
        ConditionForm::Cube => (ny * n1 * n2, vol.powf(2.0 - alpha / n)),
        ConditionForm::Linear => (vol.powf(alpha / n) * ny * n1, vol),
    })
}

/// Headline over all scales against the headline without the extreme scales.
pub(crate) fn scale_drift(per_scale: &[f64]) -> f64 {
    if per_scale.len() < 3 {
        return f64::NAN;
    }
    let all = max_of(per_scale.iter().copied());
    let inner = max_of(per_scale[1..per_scale.len() - 1].iter().copied());
    drift(inner, all)
}

pub fn characteristic_condition(id: &str, cfg: &CharacteristicConfig) -> Result<ExperimentReport> {
    require(!cfg.centers.is_empty(), "characteristic_condition needs centers")?;
    require(cfg.scales.len() >= 3, "characteristic_condition needs at least three scales")?;
    if cfg.form != ConditionForm::Linear {
        require(cfg.x2.is_some(), "bilinear forms need x2")?;
    }
    let mut rep = ExperimentReport::new(id, "characteristic_condition", echo(cfg));
    let base = cfg.grid.build()?;
    let mut scales = cfg.scales.clone();
    scales.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut per_scale_base = Vec::new();
    for (level, grid) in resolution_pair(&base).iter().enumerate() {
        let x1 = cfg.x1.build(grid)?;
        let x2 = cfg.x2.as_ref().map(|s| s.build(grid)).transpose()?;
        let y = cfg.y.build(grid)?;
        let mut per_scale = Vec::new();
        for &s in &scales {
            let mut worst = f64::NEG_INFINITY;
            for c in &cfg.centers {
                let region = match cfg.form {
                    ConditionForm::Cube => Region::Cube(Cube::new(point(c), s)?),
                    _ => Region::Ball(Ball::new(point(c), s)?),
                };
                let (m, b) = characteristic_ratio(grid, &x1, x2.as_ref(), &y, cfg.alpha, cfg.form, &region)?;
                worst = worst.max(m / b);
                if level == 0 {
                    rep.row(format!("{:?} at {c:?} scale {s}", cfg.form), m, b);
                }
            }
            per_scale.push(worst);
        }
        rep.step(grid.h(), max_of(per_scale.iter().copied()));
        if level == 0 {
            per_scale_base = per_scale;
        }
    }
    rep.headline = rep.ladder[0].headline;
    rep.check(Check::at_most("scale drift of the sup", scale_drift(&per_scale_base), STABILITY));
    Ok(rep.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomConfig {
    pub grid: GridSpec,
    pub space: SpaceSpec,
    pub seed: u64,
    pub count: usize,
    /// The fixed set E of the local integrability axiom.
    pub set_lo: Vec<f64>,
    pub set_hi: Vec<f64>,
}

fn random_family(grid: &Grid, seed: u64, count: usize, lo: &[f64], hi: &[f64]) -> Result<Vec<GridFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let p = grid.node(i);
            (0..d).all(|a| p[a] >= lo[a] - 1e-12 && p[a] <= hi[a] + 1e-12)
        })
        .collect();
    require(!inside.is_empty(), "the set E contains no node")?;
    let mut out = Vec::new();
    for t in 0..count {
        let f = match t % 3 {
            0 => FunctionSpec::RandomBumps {
                seed: seed.wrapping_add(t as u64),
                count: 3,
                radius: 0.25 * (hi[0] - lo[0]),
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            }
            .sample(grid)?,
            1 => {
                // one-node spike inside E
                let mut v = vec![0.0; grid.len()];
                v[inside[rng.gen_range(0..inside.len())]] = rng.gen_range(0.5..2.0);
                GridFunction::new(grid.clone(), v)?
            }
            _ => {
                let mut v = vec![0.0; grid.len()];
                for &i in &inside {
                    v[i] = rng.gen_range(-1.0..1.0);
                }
                GridFunction::new(grid.clone(), v)?
            }
        };
        out.push(f);
    }
    Ok(out)
}

/// The five function-space axioms on a seeded random family.
pub fn bfs_axiom_check(id: &str, cfg: &AxiomConfig) -> Result<ExperimentReport> {
    require(cfg.count >= 3, "bfs_axiom_check needs at least three functions")?;
    let mut rep = ExperimentReport::new(id, "bfs_axiom_check", echo(cfg));
    let base = cfg.grid.build()?;
    let set = Cube::new(
        point(&cfg.set_lo.iter().zip(&cfg.set_hi).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>()),
        cfg.set_hi[0] - cfg.set_lo[0],
    )?;
    let has_associate = !matches!(cfg.space, SpaceSpec::LebesgueUnchecked { p } if p < 1.0);
    if !has_associate {
        rep.note("no associate space below p = 1; the embedding bound is judged by refinement only");
    }
    for (level, grid) in resolution_pair(&base).iter().enumerate() {
        let x = cfg.space.build(grid)?;
        let fam = random_family(grid, cfg.seed, cfg.count, &cfg.set_lo, &cfg.set_hi)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);

        // (i)
        let zero = x.norm(&GridFunction::zeros(grid))?;
        let positive = fam.iter().map(|f| x.norm(f)).collect::<Result<Vec<_>>>()?;
        let axiom_i = zero == 0.0 && positive.iter().all(|&v| v > 0.0);

        // (ii)
        let mut lattice = 0.0f64;
        for (f, &nf) in fam.iter().zip(&positive) {
            let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let g = GridFunction::new(grid.clone(), f.values().iter().zip(&u).map(|(a, b)| a * b).collect())?;
            lattice = lattice.max(x.norm(&g)? / nf);
        }

        // (iii): truncations min(|f|, c·2^k) increase to f
        let mut monotone = true;
        let mut limit_gap = 0.0f64;
        for (f, &nf) in fam.iter().zip(&positive) {
            let top = f.max_abs();
            let mut prev = 0.0;
            for k in 0..=8 {
                let c = top * 2f64.powi(k - 8);
                let t = f.map(|v| v.abs().min(c))?;
                let nt = x.norm(&t)?;
                monotone &= nt >= prev * (1.0 - 1e-9);
                prev = nt;
            }
            limit_gap = limit_gap.max(drift(nf, prev));
        }

        // (iv)
        let radii = [4.0 * grid.h(), 0.25 * grid.half_width(), grid.half_width()];
        let finite = radii
            .iter()
            .map(|&r| x.norm_of_indicator(grid, &Region::Ball(Ball { center: grid.center(), radius: r })))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .all(f64::is_finite);

        // (v)
        let e = Region::Cube(set);
        let c_e = if has_associate { x.associate_norm_of_indicator(grid, &e)? } else { f64::NAN };
        let mut embed = 0.0f64;
        for (f, &nf) in fam.iter().zip(&positive) {
            let ratio = integrate(&f.abs(), &e) / nf;
            embed = embed.max(ratio);
            if level == 0 {
                rep.row(format!("embedding #{}", rep.rows.len()), ratio, if has_associate { c_e } else { 1.0 });
            }
        }
        rep.step(grid.h(), embed);
        let tag = if level == 0 { "h" } else { "h/2" };
        rep.check(Check::flag(&format!("(i) norm zero iff f = 0 at {tag}"), axiom_i));
        rep.check(Check::at_most(&format!("(ii) lattice ratio at {tag}"), lattice, 1.0 + 1e-9));
        rep.check(Check::flag(&format!("(iii) monotone truncations at {tag}"), monotone));
        rep.check(Check::at_most(&format!("(iii) truncation limit gap at {tag}"), limit_gap, 1e-9));
        rep.check(Check::flag(&format!("(iv) finite indicator norms at {tag}"), finite));
        if has_associate {
            rep.check(Check::at_most(&format!("(v) embedding ratio over C_E at {tag}"), embed / c_e, 1.0 + IDENTITY_TOL));
        }
    }
    rep.headline = rep.ladder[0].headline;
    Ok(rep.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeffermanSteinConfig {
    pub grid: GridSpec,
    pub exponent: super::specs::ExponentSpec,
    pub delta: f64,
    pub functions: Vec<FunctionSpec>,
    #[serde(default = "default_family")]
    pub family: FamilySpec,
}

fn default_family() -> FamilySpec {
    FamilySpec::Default
}

/// ‖f‖_{p(·)}/‖M♯_δ f‖_{p(·)} across a family of mean-zero bumps.
pub fn fefferman_stein_check(id: &str, cfg: &FeffermanSteinConfig) -> Result<ExperimentReport> {
    require(!cfg.functions.is_empty(), "fefferman_stein_check needs functions")?;
    let mut rep = ExperimentReport::new(id, "fefferman_stein_check", echo(cfg));
    let base = cfg.grid.build()?;
    let half = cfg.functions.len().div_ceil(2);
    let mut first_half = f64::NEG_INFINITY;
    for (level, grid) in resolution_pair(&base).iter().enumerate() {
        let p = cfg.exponent.build(grid)?;
        let family = cfg.family.build(grid)?;
        let mut headline = f64::NEG_INFINITY;
        for (i, spec) in cfg.functions.iter().enumerate() {
            let f = spec.sample(grid)?;
            if f.is_zero() {
                if level == 0 {
                    rep.note(format!("{} is zero; skipped", spec.label()));
                }
                continue;
            }
            let m = sharp_maximal(&f, cfg.delta, &family)?;
            let (nf, nm) = (luxemburg_norm(&f, &p)?, luxemburg_norm(&m, &p)?);
            let ratio = nf / nm;
            headline = headline.max(ratio);
            if level == 0 {
                rep.row(spec.label(), nf, nm);
                if i < half {
                    first_half = first_half.max(ratio);
                }
            }
        }
        rep.step(grid.h(), headline);
    }
    rep.headline = rep.ladder[0].headline;
    rep.check(Check::at_most("finite ratio", if rep.headline.is_finite() { 0.0 } else { 1.0 }, 0.0));
    if cfg.functions.len() >= 2 {
        rep.check(Check::at_most("family enlargement drift", drift(first_half, rep.headline), STABILITY));
    }
    Ok(rep.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileClassConfig {
    pub grid: GridSpec,
    pub profile: ProfileSpec,
    pub space: SpaceSpec,
    pub alpha: f64,
    #[serde(default)]
    pub strengthened: bool,
    pub centers: Vec<Vec<f64>>,
    pub r0: f64,
    pub levels: usize,
}

/// Runs the profile class checker and tabulates the worst partial sums.
pub fn profile_class_check(id: &str, cfg: &ProfileClassConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new(id, "profile_class_check", echo(cfg));
    let grid = cfg.grid.build()?;
    let lattice = ProfileLattice {
        grid: grid.clone(),
        centers: cfg.centers.iter().map(|c| point(c)).collect(),
        r0: cfg.r0,
        levels: cfg.levels,
    };
    let u = cfg.profile.build(&grid)?;
    let x = cfg.space.build(&grid)?;
    let cert = w_class_check(&u, &x, cfg.alpha, cfg.strengthened, &lattice)?;
    for (j, s) in cert.series_partial_sums.iter().enumerate() {
        rep.row(format!("S_{}", j + 1), *s, 1.0);
    }
    rep.headline = cert.series_max;
    let pos = |v: Option<f64>| v.map_or(true, |x| x.is_finite() && x > 0.0);
    rep.check(Check::flag("u bounded below for r >= 1", pos(cert.min_u_large_radius)));
    rep.check(Check::flag("indicator ratio finite for r < 1", pos(cert.max_indicator_ratio_small_radius)));
    rep.check(Check::at_most("last-term ratio", cert.series_last_term_ratio, 1.0 - 1e-12));
    if let Some(s) = cert.strengthened_last_term_ratio {
        rep.check(Check::at_most("strengthened last-term ratio", s, 1.0 - 1e-12));
    }
    rep.check(Check::flag("doubling finite", cert.doubling.is_finite()));
    if cert.clipped {
        rep.note("some balls were clipped to the grid box");
    }
    if !cert.note.is_empty() {
        rep.note(cert.note.clone());
    }
    Ok(rep.finish())
}
