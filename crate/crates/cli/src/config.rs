//! Scenario configuration: a TOML document with field values given either
//! as expressions over the coordinates or as data files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use flowsect::form::{KForm, VectorField};
use flowsect::grid::{ScalarField, TorusDomain};
use flowsect::metric::MetricField;
use flowsect::scenario::{Scenario, Tolerances};
use flowsect::section::{BaseMap, SuspensionSpec};

use crate::expr;

/// Configuration or I/O failure with enough location context to act on.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for ConfigError {}

type CfgResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    domain: DomainCfg,
    metric: Option<MetricCfg>,
    vector_field: Option<VectorCfg>,
    volume_form: Option<VolumeCfg>,
    tolerances: Option<TolerancesCfg>,
    pipeline: Option<PipelineCfg>,
    suspension: Option<SuspensionCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainCfg {
    dim: usize,
    resolution: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricCfg {
    kind: String,
    /// Diagonal entries as expressions (kind = "diagonal").
    entries: Option<Vec<String>>,
    /// Lower-triangular component files (kind = "files").
    files: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorCfg {
    components: Option<Vec<String>>,
    files: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeCfg {
    kind: String,
    coefficient: Option<String>,
    file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolerancesCfg {
    identity_tol: Option<f64>,
    closedness_tol: Option<f64>,
    positivity_margin: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineCfg {
    level: Option<f64>,
    seeds: Option<usize>,
    budget_factor: Option<f64>,
    q_max: Option<u64>,
    class_hint: Option<Vec<i64>>,
    rng_seed: Option<u64>,
    measure_arcs: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuspensionCfg {
    flow_resolution: usize,
    base_resolution: Vec<usize>,
    rotation: Option<Vec<f64>>,
    /// Displacement expressions over the base coordinates.
    displacement: Option<Vec<String>>,
    roof: String,
}

/// Pipeline options after defaults and command-line overrides.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub level: f64,
    pub seeds: usize,
    pub budget_factor: f64,
    pub q_max: u64,
    pub class_hint: Option<Vec<i64>>,
    pub rng_seed: u64,
    pub measure_arcs: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            level: 0.0,
            seeds: 64,
            budget_factor: 0.5,
            q_max: 1_000_000,
            class_hint: None,
            rng_seed: 7,
            measure_arcs: 16,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub resolution: Option<usize>,
    pub seeds: Option<usize>,
    pub class_hint: Option<Vec<i64>>,
}

/// A parsed configuration ready to drive commands.
#[derive(Debug)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub scenario: Option<Scenario>,
    pub pipeline: PipelineOptions,
    pub suspension: Option<(SuspensionSpec, usize)>,
}

const SCENARIO_VARS: [&str; 3] = ["x", "y", "z"];
const BASE_VARS: [&str; 2] = ["y", "z"];

pub fn load_config(path: &Path, overrides: &Overrides) -> CfgResult<LoadedConfig> {
    let err = |message: String| ConfigError { path: path.to_path_buf(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(format!("cannot read: {e}")))?;
    let cfg: ConfigFile =
        toml::from_str(&text).map_err(|e| err(format!("parse error: {e}")))?;

    let mut resolution = cfg.domain.resolution.clone();
    if let Some(r) = overrides.resolution {
        resolution = vec![r; cfg.domain.dim];
    }
    if resolution.len() != cfg.domain.dim {
        return Err(err(format!(
            "domain.resolution must list {} axes, got {}",
            cfg.domain.dim,
            resolution.len()
        )));
    }
    let domain = TorusDomain::new(&resolution).map_err(|e| err(format!("domain: {e}")))?;

    let dir = path.parent().unwrap_or(Path::new("."));
    let vars = &SCENARIO_VARS[..cfg.domain.dim];

    let scenario = match (&cfg.metric, &cfg.vector_field) {
        (Some(metric_cfg), Some(vector_cfg)) => {
            let metric = build_metric(&domain, metric_cfg, vars, dir, path)?;
            let x = build_vector(&domain, vector_cfg, vars, dir, path)?;
            let omega = build_volume(&domain, cfg.volume_form.as_ref(), &metric, vars, dir, path)?;
            let mut tol = Tolerances::default();
            if let Some(t) = &cfg.tolerances {
                if let Some(v) = t.identity_tol {
                    tol.identity_tol = v;
                }
                if let Some(v) = t.closedness_tol {
                    tol.closedness_tol = v;
                }
                if let Some(v) = t.positivity_margin {
                    tol.positivity_margin = v;
                }
            }
            Some(
                Scenario::new(domain.clone(), metric, x, omega, tol)
                    .map_err(|e| err(format!("scenario: {e}")))?,
            )
        }
        (None, None) => None,
        _ => {
            return Err(err(
                "metric and vector_field must be given together".to_string()
            ))
        }
    };

    let mut pipeline = PipelineOptions::default();
    if let Some(p) = &cfg.pipeline {
        if let Some(v) = p.level {
            pipeline.level = v;
        }
        if let Some(v) = p.seeds {
            pipeline.seeds = v;
        }
        if let Some(v) = p.budget_factor {
            pipeline.budget_factor = v;
        }
        if let Some(v) = p.q_max {
            pipeline.q_max = v;
        }
        if let Some(v) = &p.class_hint {
            pipeline.class_hint = Some(v.clone());
        }
        if let Some(v) = p.rng_seed {
            pipeline.rng_seed = v;
        }
        if let Some(v) = p.measure_arcs {
            pipeline.measure_arcs = v;
        }
    }
    if let Some(s) = overrides.seeds {
        pipeline.seeds = s;
    }
    if let Some(h) = &overrides.class_hint {
        pipeline.class_hint = Some(h.clone());
    }

    let suspension = match &cfg.suspension {
        Some(sc) => Some(build_suspension(sc, path)?),
        None => None,
    };

    Ok(LoadedConfig { path: path.to_path_buf(), scenario, pipeline, suspension })
}

fn sample_expr(
    domain: &TorusDomain,
    source: &str,
    vars: &[&str],
    path: &Path,
    what: &str,
) -> CfgResult<ScalarField> {
    let parsed = expr::parse(source, vars).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        message: format!("{what}: expression error {e} in '{source}'"),
    })?;
    Ok(ScalarField::from_fn(domain, |p| parsed.eval(p)))
}

fn build_metric(
    domain: &TorusDomain,
    cfg: &MetricCfg,
    vars: &[&str],
    dir: &Path,
    path: &Path,
) -> CfgResult<MetricField> {
    let err = |message: String| ConfigError { path: path.to_path_buf(), message };
    match cfg.kind.as_str() {
        "flat" => Ok(MetricField::flat(domain)),
        "diagonal" => {
            let entries = cfg
                .entries
                .as_ref()
                .ok_or_else(|| err("metric.entries required for kind = \"diagonal\"".into()))?;
            let fields = entries
                .iter()
                .map(|e| sample_expr(domain, e, vars, path, "metric"))
                .collect::<CfgResult<Vec<_>>>()?;
            MetricField::diagonal(domain, fields).map_err(|e| err(format!("metric: {e}")))
        }
        "files" => {
            let files = cfg
                .files
                .as_ref()
                .ok_or_else(|| err("metric.files required for kind = \"files\"".into()))?;
            let fields = files
                .iter()
                .map(|f| read_field_file(&dir.join(f), domain))
                .collect::<CfgResult<Vec<_>>>()?;
            MetricField::from_lower_components(domain, fields)
                .map_err(|e| err(format!("metric: {e}")))
        }
        other => Err(err(format!("unknown metric kind '{other}'"))),
    }
}

fn build_vector(
    domain: &TorusDomain,
    cfg: &VectorCfg,
    vars: &[&str],
    dir: &Path,
    path: &Path,
) -> CfgResult<VectorField> {
    let err = |message: String| ConfigError { path: path.to_path_buf(), message };
    let fields = match (&cfg.components, &cfg.files) {
        (Some(exprs), None) => exprs
            .iter()
            .map(|e| sample_expr(domain, e, vars, path, "vector_field"))
            .collect::<CfgResult<Vec<_>>>()?,
        (None, Some(files)) => files
            .iter()
            .map(|f| read_field_file(&dir.join(f), domain))
            .collect::<CfgResult<Vec<_>>>()?,
        _ => {
            return Err(err(
                "vector_field needs exactly one of components or files".into()
            ))
        }
    };
    VectorField::from_components(domain, fields).map_err(|e| err(format!("vector_field: {e}")))
}

fn build_volume(
    domain: &TorusDomain,
    cfg: Option<&VolumeCfg>,
    metric: &MetricField,
    vars: &[&str],
    dir: &Path,
    path: &Path,
) -> CfgResult<KForm> {
    let err = |message: String| ConfigError { path: path.to_path_buf(), message };
    let Some(cfg) = cfg else {
        return Ok(metric.volume_form());
    };
    match cfg.kind.as_str() {
        "riemannian" => Ok(metric.volume_form()),
        "expression" => {
            let source = cfg
                .coefficient
                .as_ref()
                .ok_or_else(|| err("volume_form.coefficient required".into()))?;
            let coeff = sample_expr(domain, source, vars, path, "volume_form")?;
            KForm::from_components(domain, domain.dim(), vec![coeff])
                .map_err(|e| err(format!("volume_form: {e}")))
        }
        "file" => {
            let file =
                cfg.file.as_ref().ok_or_else(|| err("volume_form.file required".into()))?;
            let coeff = read_field_file(&dir.join(file), domain)?;
            KForm::from_components(domain, domain.dim(), vec![coeff])
                .map_err(|e| err(format!("volume_form: {e}")))
        }
        other => Err(err(format!("unknown volume_form kind '{other}'"))),
    }
}

fn build_suspension(cfg: &SuspensionCfg, path: &Path) -> CfgResult<(SuspensionSpec, usize)> {
    let err = |message: String| ConfigError { path: path.to_path_buf(), message };
    let base_domain = TorusDomain::new(&cfg.base_resolution)
        .map_err(|e| err(format!("suspension base: {e}")))?;
    let b = base_domain.dim();
    if b > 2 {
        return Err(err("suspension base must have dimension 1 or 2".into()));
    }
    let vars = &BASE_VARS[..b];
    let base = match (&cfg.rotation, &cfg.displacement) {
        (Some(alpha), None) => {
            if alpha.len() != b {
                return Err(err("suspension.rotation length must match base dim".into()));
            }
            BaseMap::Rotation(alpha.clone())
        }
        (None, Some(exprs)) => {
            if exprs.len() != b {
                return Err(err("suspension.displacement length must match base dim".into()));
            }
            let fields = exprs
                .iter()
                .map(|e| sample_expr(&base_domain, e, vars, path, "suspension"))
                .collect::<CfgResult<Vec<_>>>()?;
            BaseMap::Displacement(fields)
        }
        _ => {
            return Err(err(
                "suspension needs exactly one of rotation or displacement".into()
            ))
        }
    };
    let roof = sample_expr(&base_domain, &cfg.roof, vars, path, "suspension.roof")?;
    Ok((SuspensionSpec { base, roof }, cfg.flow_resolution))
}

/// Plain-text field file: header line, resolution line, one sample per line
/// in row-major order.
pub fn read_field_file(path: &Path, domain: &TorusDomain) -> CfgResult<ScalarField> {
    let err = |message: String| ConfigError { path: path.to_path_buf(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(format!("cannot read: {e}")))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("# flowsect-field") => {}
        _ => return Err(err("missing '# flowsect-field' header".into())),
    }
    let res_line = lines.next().ok_or_else(|| err("missing resolution line".into()))?;
    let res: Vec<usize> = res_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(format!("bad resolution line: {e}")))?;
    if res != domain.resolution() {
        return Err(err(format!(
            "field resolution {:?} does not match domain {:?}",
            res,
            domain.resolution()
        )));
    }
    let mut values = Vec::with_capacity(domain.len());
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|e| err(format!("bad value on data line {}: {e}", i + 1)))?;
        values.push(v);
    }
    ScalarField::from_values(domain, values).map_err(|e| err(format!("field data: {e}")))
}

/// Write a field in the format read by [`read_field_file`].
pub fn write_field_file(path: &Path, field: &ScalarField) -> CfgResult<()> {
    let err = |message: String| ConfigError { path: path.to_path_buf(), message };
    let mut out = String::from("# flowsect-field\n");
    let res: Vec<String> =
        field.domain().resolution().iter().map(|n| n.to_string()).collect();
    out.push_str(&res.join(" "));
    out.push('\n');
    for v in field.values() {
        out.push_str(&format!("{v:.17e}\n"));
    }
    std::fs::write(path, out).map_err(|e| err(format!("cannot write: {e}")))
}
