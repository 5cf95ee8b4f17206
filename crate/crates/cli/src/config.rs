//! Experiment files: named declarations plus an experiment list whose
//! parameters refer to declarations by name.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::jobs::{Job, JobKind};
use crate::presets;

/// Declaration tables and the parameter keys that refer to them.
const NAMESPACES: &[(&str, &[&str])] = &[
    ("grids", &["grid"]),
    ("spaces", &["space", "x1", "x2", "y", "dual_override"]),
    ("weights", &["weight"]),
    ("exponents", &["exponent"]),
    ("kernels", &["kernel"]),
    ("functions", &["f", "g", "b", "function", "functions"]),
    ("profiles", &["profile", "u", "u1", "u2", "first", "second"]),
    ("families", &["family", "bmo_family"]),
];

fn singular(table: &str) -> &str {
    table.strip_suffix('s').unwrap_or(table)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub paper_anchor: String,
    /// Designed to fail; reported as such in the summary.
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default)]
    pub params: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub grids: BTreeMap<String, Value>,
    #[serde(default)]
    pub spaces: BTreeMap<String, Value>,
    #[serde(default)]
    pub weights: BTreeMap<String, Value>,
    #[serde(default)]
    pub exponents: BTreeMap<String, Value>,
    #[serde(default)]
    pub kernels: BTreeMap<String, Value>,
    #[serde(default)]
    pub functions: BTreeMap<String, Value>,
    #[serde(default)]
    pub profiles: BTreeMap<String, Value>,
    #[serde(default)]
    pub families: BTreeMap<String, Value>,
    pub experiments: Vec<ExperimentEntry>,
}

/// Grid spacing override: an absolute spacing or a divisor of every grid's own.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Resolution {
    Absolute(f64),
    Divide(f64),
}

impl std::str::FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        let parsed = if let Some(k) = t.strip_prefix("h/") {
            k.parse::<f64>().ok().filter(|k| *k >= 1.0).map(Resolution::Divide)
        } else {
            t.parse::<f64>().ok().filter(|h| *h > 0.0 && h.is_finite()).map(Resolution::Absolute)
        };
        parsed.ok_or_else(|| format!("`{s}` is neither a positive spacing nor of the form h/k with k >= 1"))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub resolution: Option<Resolution>,
    pub seed: Option<u64>,
}

/// One experiment with references resolved and overrides applied.
#[derive(Clone, Debug)]
pub struct Planned {
    pub id: String,
    pub kind: JobKind,
    pub paper_anchor: String,
    pub negative_control: bool,
    pub params: Value,
    pub job: Job,
}

impl LabConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: LabConfig = toml::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?;
        Ok(cfg)
    }

    /// Reads a file, or a built-in preset given as `preset:NAME`.
    pub fn load(path: &str) -> Result<Self> {
        if let Some(name) = path.strip_prefix("preset:") {
            let p = presets::find(name).ok_or_else(|| anyhow!("unknown preset `{name}`; see --list"))?;
            return Self::parse(p.text).with_context(|| format!("preset `{name}`"));
        }
        let text = std::fs::read_to_string(Path::new(path)).with_context(|| format!("reading {path}"))?;
        Self::parse(&text).with_context(|| format!("in {path}"))
    }

    fn table(&self, name: &str) -> &BTreeMap<String, Value> {
        match name {
            "grids" => &self.grids,
            "spaces" => &self.spaces,
            "weights" => &self.weights,
            "exponents" => &self.exponents,
            "kernels" => &self.kernels,
            "functions" => &self.functions,
            "profiles" => &self.profiles,
            _ => &self.families,
        }
    }

    fn lookup(&self, key: &str, name: &str, depth: usize) -> Result<Value> {
        let table = NAMESPACES.iter().find(|(_, keys)| keys.contains(&key)).map(|(t, _)| *t).expect("reference key");
        let decl = self
            .table(table)
            .get(name)
            .ok_or_else(|| anyhow!("unresolved reference: {} `{name}` is not declared under [{table}]", singular(table)))?;
        self.resolve_value(decl, depth + 1)
    }

    fn resolve_value(&self, v: &Value, depth: usize) -> Result<Value> {
        if depth > 32 {
            bail!("reference chain deeper than 32 levels; is there a cycle?");
        }
        Ok(match v {
            Value::Object(map) => {
                let mut out = Map::new();
                for (k, val) in map {
                    let is_ref = NAMESPACES.iter().any(|(_, keys)| keys.contains(&k.as_str()));
                    let r = match val {
                        Value::String(name) if is_ref => self.lookup(k, name, depth)?,
                        Value::Array(items) if is_ref => Value::Array(
                            items
                                .iter()
                                .map(|it| match it {
                                    Value::String(name) => self.lookup(k, name, depth),
                                    other => self.resolve_value(other, depth + 1),
                                })
                                .collect::<Result<_>>()?,
                        ),
                        other => self.resolve_value(other, depth + 1)?,
                    };
                    out.insert(k.clone(), r);
                }
                Value::Object(out)
            }
            Value::Array(items) => Value::Array(items.iter().map(|x| self.resolve_value(x, depth + 1)).collect::<Result<_>>()?),
            other => other.clone(),
        })
    }

    /// Resolves every experiment, applies overrides and type-checks the
    /// parameters.
    pub fn plan(&self, ov: &Overrides) -> Result<Vec<Planned>> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for e in &self.experiments {
            if !seen.insert(e.id.clone()) {
                bail!("duplicate experiment id `{}`", e.id);
            }
            if e.paper_anchor.trim().is_empty() {
                bail!("experiment `{}` has an empty paper_anchor", e.id);
            }
            let kind: JobKind = e.kind.parse().map_err(|m: String| anyhow!("experiment `{}`: {m}", e.id))?;
            let mut params = self.resolve_value(&e.params, 0).with_context(|| format!("experiment `{}`", e.id))?;
            if !params.is_object() {
                bail!("experiment `{}` needs a [experiments.params] table", e.id);
            }
            let seed = ov.seed.unwrap_or(self.seed);
            if kind == JobKind::BfsAxiomCheck && (ov.seed.is_some() || params.get("seed").is_none()) {
                params["seed"] = Value::from(seed);
            }
            if let Some(r) = ov.resolution {
                apply_resolution(&mut params, r);
            }
            let job = Job::from_params(kind, &params).with_context(|| format!("experiment `{}` ({})", e.id, e.kind))?;
            job.validate().with_context(|| format!("experiment `{}` ({})", e.id, e.kind))?;
            out.push(Planned {
                id: e.id.clone(),
                kind,
                paper_anchor: e.paper_anchor.clone(),
                negative_control: e.negative_control,
                params,
                job,
            });
        }
        Ok(out)
    }
}

/// Rewrites the spacing of every grid in the parameters; the BMO experiment,
/// which builds its own grids, scales its cells per δ instead.
fn apply_resolution(v: &mut Value, r: Resolution) {
    match v {
        Value::Object(map) => {
            if let Some(Value::Object(grid)) = map.get_mut("grid") {
                if let Some(h) = grid.get("h").and_then(Value::as_f64) {
                    let nh = match r {
                        Resolution::Absolute(x) => x,
                        Resolution::Divide(k) => h / k,
                    };
                    grid.insert("h".into(), Value::from(nh));
                }
            }
            if let (Some(Value::Number(c)), Resolution::Divide(k)) = (map.get("cells"), r) {
                if let Some(c) = c.as_f64() {
                    map.insert("cells".into(), Value::from((c * k).round() as u64));
                }
            }
            for (k, child) in map.iter_mut() {
                if k != "grid" {
                    apply_resolution(child, r);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| apply_resolution(x, r)),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 1
[grids.line]
dim = 1
lower = [-2.0]
upper = [2.0]
h = 0.0625
[spaces.l2]
kind = "lebesgue"
p = 2.0
[functions.chi]
kind = "indicator"
lo = [-1.0]
hi = [1.0]
[[experiments]]
id = "pairing"
type = "holder_check"
paper_anchor = "pairing bound"
[experiments.params]
grid = "line"
space = "l2"
pairs = [{ f = "chi", g = "chi" }]
"#;

    #[test]
    fn references_resolve_into_declarations() {
        let cfg = LabConfig::parse(MINIMAL).unwrap();
        let plan = cfg.plan(&Overrides::default()).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].params["space"]["p"], 2.0);
        assert_eq!(plan[0].params["pairs"][0]["f"]["kind"], "indicator");
    }

    #[test]
    fn unresolved_reference_names_the_missing_declaration() {
        let text = MINIMAL.replace("space = \"l2\"", "space = \"l7\"");
        let err = LabConfig::parse(&text).unwrap().plan(&Overrides::default()).unwrap_err();
        assert!(format!("{err:#}").contains("space `l7`"), "{err:#}");
    }

    #[test]
    fn resolution_override_divides_every_grid() {
        let cfg = LabConfig::parse(MINIMAL).unwrap();
        let ov = Overrides { resolution: Some("h/2".parse().unwrap()), seed: None };
        let plan = cfg.plan(&ov).unwrap();
        assert_eq!(plan[0].params["grid"]["h"], 0.03125);
    }

    #[test]
    fn parse_errors_carry_a_position() {
        let err = LabConfig::parse("seed = \n[[experiments]]").unwrap_err();
        assert!(format!("{err}").contains("line"), "{err}");
    }
}
