use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};
use tentlab_core::coeffs::Scenario;
use tentlab_core::evolve::Scheme;
use tentlab_core::grid::Grid;
use tentlab_core::norms::NormConfig;
use tentlab_core::verify::{lookup, CheckOptions, DEFAULT_EXPONENTS};
use tentlab_core::DENSE_CELL_LIMIT;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub grid: GridConfig,
    pub coefficients: CoefficientsConfig,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub horizon: f64,
    #[serde(default)]
    pub norms: NormsConfig,
    #[serde(default)]
    pub checks: Option<Vec<CheckEntry>>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_scheme() -> Scheme {
    Scheme::ExactExpm
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub period: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub scenario: String,
    #[serde(default)]
    pub params: Option<Value>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    #[serde(default)]
    pub t_min: Option<f64>,
    #[serde(default)]
    pub p: Option<Vec<Exponent>>,
    #[serde(default)]
    pub delta_levels: Option<u32>,
}

/// An exponent in `[1, ∞]`; infinity is written as the string `"inf"`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(try_from = "Value")]
pub struct Exponent(pub f64);

impl TryFrom<Value> for Exponent {
    type Error = String;

    fn try_from(v: Value) -> std::result::Result<Self, String> {
        let p = match &v {
            Value::Number(n) => n.as_f64().ok_or("exponent is not a finite number")?,
            Value::String(s) if s == "inf" => f64::INFINITY,
            _ => return Err(format!("exponent must be a number or \"inf\", got {v}")),
        };
        if !(p >= 1.0) {
            return Err(format!("exponent {p} below 1"));
        }
        Ok(Exponent(p))
    }
}

/// A check id, optionally with overrides: either `"energy"` or
/// `{"id": "offdiagonal", "ratios": [1, 4]}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(try_from = "Value")]
pub struct CheckEntry(pub CheckSpec);

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub id: String,
    #[serde(default)]
    pub exponents: Option<Vec<Exponent>>,
    #[serde(default)]
    pub p: Option<Exponent>,
    #[serde(default)]
    pub jump_counts: Option<Vec<usize>>,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub budgets: Option<Vec<f64>>,
    #[serde(default)]
    pub ratios: Option<Vec<f64>>,
}

impl TryFrom<Value> for CheckEntry {
    type Error = String;

    fn try_from(v: Value) -> std::result::Result<Self, String> {
        match v {
            Value::String(id) => Ok(CheckEntry(CheckSpec { id, ..CheckSpec::default() })),
            Value::Object(_) => serde_json::from_value(v).map(CheckEntry).map_err(|e| e.to_string()),
            other => Err(format!("check entry must be an id or an object, got {other}")),
        }
    }
}

impl CheckSpec {
    fn set_overrides(&self) -> Vec<&'static str> {
        [
            ("exponents", self.exponents.is_some()),
            ("p", self.p.is_some()),
            ("jump_counts", self.jump_counts.is_some()),
            ("budget", self.budget.is_some()),
            ("budgets", self.budgets.is_some()),
            ("ratios", self.ratios.is_some()),
        ]
        .into_iter()
        .filter_map(|(name, set)| set.then_some(name))
        .collect()
    }
}

/// Overrides each check accepts.
fn allowed_overrides(id: &str) -> &'static [&'static str] {
    match id {
        "offdiagonal" => &["ratios"],
        "max_square" => &["exponents"],
        "bv_uniformity" => &["p", "jump_counts", "budget", "budgets"],
        _ => &[],
    }
}

/// A validated check request.
#[derive(Clone, Debug)]
pub struct CheckRequest {
    pub id: &'static str,
    pub options: CheckOptions,
    /// Overrides as written, echoed into the report.
    pub overrides: Value,
}

/// Fully validated configuration with every default filled in.
#[derive(Clone, Debug)]
pub struct Config {
    pub grid: Grid,
    pub scenario: Scenario,
    pub seed: u64,
    pub scheme: Scheme,
    pub horizon: f64,
    pub norms: NormConfig,
    pub exponents: Vec<f64>,
    pub checks: Vec<CheckRequest>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

impl RawConfig {
    /// Validates the schema-level constraints; nothing is computed here.
    pub fn resolve(self, config_dir: &Path) -> Result<Config> {
        let g = self.grid;
        let grid = Grid::new(g.dim, g.n, g.period).context("grid")?;
        ensure!(self.horizon.is_finite() && self.horizon > 0.0, "horizon must be positive, got {}", self.horizon);
        if self.scheme == Scheme::ExactExpm && grid.cells() > DENSE_CELL_LIMIT {
            bail!("exact_expm needs at most {DENSE_CELL_LIMIT} cells, the grid has {}", grid.cells());
        }

        let c = self.coefficients;
        let params = c.params.unwrap_or_else(|| json!({}));
        let scenario: Scenario = serde_json::from_value(json!({ "scenario": c.scenario, "params": params }))
            .with_context(|| format!("coefficients: scenario `{}`", c.scenario))?;

        let t_min = self.norms.t_min.unwrap_or(self.horizon * 0.5f64.powi(16));
        let levels = self.norms.delta_levels.unwrap_or(15);
        let deltas: Vec<f64> = (0..=levels).map(|j| self.horizon * 0.5f64.powi(j as i32)).collect();
        let norms = NormConfig::new(t_min, self.horizon, deltas, 1.0).context("norms")?;
        let exponents = match self.norms.p {
            Some(ps) => {
                ensure!(!ps.is_empty(), "norms.p must not be empty");
                ps.iter().map(|e| e.0).collect()
            }
            None => DEFAULT_EXPONENTS.to_vec(),
        };

        let specs = match self.checks {
            Some(entries) => entries.into_iter().map(|e| e.0).collect(),
            None => tentlab_core::verify::check_ids()
                .into_iter()
                .map(|id| CheckSpec { id: id.into(), ..CheckSpec::default() })
                .collect::<Vec<_>>(),
        };
        ensure!(!specs.is_empty(), "no checks requested");
        let mut seen = BTreeSet::new();
        let mut checks = Vec::with_capacity(specs.len());
        for spec in specs {
            let info = lookup(&spec.id).with_context(|| format!("unknown check id `{}`", spec.id))?;
            ensure!(seen.insert(info.id), "check `{}` requested twice", info.id);
            let allowed = allowed_overrides(info.id);
            if let Some(bad) = spec.set_overrides().into_iter().find(|o| !allowed.contains(o)) {
                bail!("check `{}` does not accept the override `{bad}`", info.id);
            }
            checks.push(request(info.id, &spec, &exponents, &norms)?);
        }

        let needs_room = checks.iter().any(|c| c.id == "offdiagonal" || c.id == "reverse_holder");
        if needs_room {
            let min = 8.0 * self.horizon.sqrt();
            ensure!(
                grid.period() >= min * (1.0 - 1e-12),
                "period {} is below 8·√T = {min}, required by offdiagonal and reverse_holder",
                grid.period()
            );
        }
        if let Some(w) = self.workers {
            ensure!(w >= 1, "workers must be at least 1");
        }

        Ok(Config {
            grid,
            scenario,
            seed: c.seed,
            scheme: self.scheme,
            horizon: self.horizon,
            norms,
            exponents,
            checks,
            workers: self.workers,
            output_dir: self.output_dir.map(|d| if d.is_absolute() { d } else { config_dir.join(d) }),
        })
    }
}

fn request(id: &'static str, spec: &CheckSpec, exponents: &[f64], norms: &NormConfig) -> Result<CheckRequest> {
    let positive = |name: &str, v: &[f64]| -> Result<()> {
        ensure!(!v.is_empty(), "{id}: `{name}` must not be empty");
        ensure!(v.iter().all(|x| x.is_finite() && *x > 0.0), "{id}: `{name}` entries must be positive");
        Ok(())
    };
    let mut options = CheckOptions::default();
    let mut overrides = serde_json::Map::new();
    match id {
        "offdiagonal" => {
            if let Some(r) = &spec.ratios {
                positive("ratios", r)?;
                options.ratios = Some(r.clone());
                overrides.insert("ratios".into(), json!(r));
            }
        }
        "max_square" => {
            let ps: Vec<f64> = match &spec.exponents {
                Some(e) => {
                    ensure!(!e.is_empty(), "{id}: `exponents` must not be empty");
                    e.iter().map(|x| x.0).collect()
                }
                None => exponents.to_vec(),
            };
            overrides.insert("exponents".into(), exponents_json(&ps));
            options.exponents = Some(ps);
            options.norms = Some(norms.clone());
        }
        "bv_uniformity" => {
            if let Some(p) = spec.p {
                options.exponents = Some(vec![p.0]);
                overrides.insert("p".into(), exponents_json(&[p.0]));
            }
            if let Some(k) = &spec.jump_counts {
                ensure!(!k.is_empty() && k.iter().all(|&k| k >= 1), "{id}: `jump_counts` must be positive");
                options.jump_counts = Some(k.clone());
                overrides.insert("jump_counts".into(), json!(k));
            }
            if let Some(b) = spec.budget {
                ensure!(b.is_finite() && b >= 0.0, "{id}: `budget` must be nonnegative");
                options.budget = Some(b);
                overrides.insert("budget".into(), json!(b));
            }
            if let Some(b) = &spec.budgets {
                ensure!(
                    !b.is_empty() && b.iter().all(|x| x.is_finite() && *x >= 0.0),
                    "{id}: `budgets` must be nonnegative"
                );
                options.budgets = Some(b.clone());
                overrides.insert("budgets".into(), json!(b));
            }
        }
        _ => {}
    }
    Ok(CheckRequest { id, options, overrides: Value::Object(overrides) })
}

pub fn exponents_json(ps: &[f64]) -> Value {
    Value::Array(ps.iter().map(|&p| if p.is_infinite() { json!("inf") } else { json!(p) }).collect())
}

impl Config {
    /// The resolved configuration as it is echoed into the report.
    pub fn to_json(&self) -> Value {
        let scenario = serde_json::to_value(&self.scenario).expect("scenario serializes");
        json!({
            "grid": {
                "dim": self.grid.dim(),
                "n": self.grid.points_per_axis(),
                "period": self.grid.period(),
            },
            "coefficients": {
                "scenario": scenario["scenario"],
                "params": scenario.get("params").cloned().unwrap_or_else(|| json!({})),
                "seed": self.seed,
            },
            "scheme": self.scheme,
            "horizon": self.horizon,
            "norms": {
                "t_min": self.norms.t_min,
                "p": exponents_json(&self.exponents),
                "delta_levels": self.norms.delta_grid.len() - 1,
            },
            "checks": self.checks.iter().map(|c| json!({ "id": c.id, "overrides": c.overrides })).collect::<Vec<_>>(),
            "workers": self.workers,
        })
    }
}
