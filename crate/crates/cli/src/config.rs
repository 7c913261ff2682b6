//! Run configuration: TOML file values overlaid by command-line flags.

use std::path::{Path, PathBuf};

use gylab::models::{HopfAnsatz, ModelSpec, DEFAULT_SEED};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Curvature,
    Degree,
    Yamabe,
    Cyt,
    Relations,
    HopfSweep,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::Curvature => "curvature",
            Operation::Degree => "degree",
            Operation::Yamabe => "yamabe",
            Operation::Cyt => "cyt",
            Operation::Relations => "relations",
            Operation::HopfSweep => "hopf-sweep",
        }
    }

    pub fn default_ts(self) -> Vec<f64> {
        match self {
            Operation::Degree => vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            Operation::Yamabe => vec![-1.0],
            _ => vec![-1.0, 0.0, 1.0],
        }
    }

    pub fn default_tol(self) -> f64 {
        match self {
            Operation::Cyt | Operation::HopfSweep => gylab::toric::CYT_TOL,
            _ => 1e-8,
        }
    }
}

/// Keys accepted in a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub t: Option<Vec<f64>>,
    pub model: Option<toml::Table>,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: Option<usize>,
    pub count: Option<usize>,
    pub step: Option<f64>,
    pub ansatz: Option<HopfAnsatz>,
}

/// Model flags; each one overrides the matching key of the file's [model] table.
#[derive(Debug, Clone, Default)]
pub struct ModelOverrides {
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub counts: Option<Vec<usize>>,
    pub amplitude: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub samples: Option<usize>,
    pub ansatz: Option<HopfAnsatz>,
}

#[derive(Debug, Clone, Default)]
pub struct GlobalOverrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub t: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub n: usize,
    pub count: usize,
    pub step: f64,
    pub ansatz: HopfAnsatz,
}

/// Fully resolved configuration, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub operation: Operation,
    pub model: Option<ModelSpec>,
    pub sweep: Option<Sweep>,
    pub t: Vec<f64>,
    pub seed: u64,
    pub tol: f64,
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn model_spec(file: Option<toml::Table>, flags: &ModelOverrides) -> Result<ModelSpec, ConfigError> {
    let mut map: Map<String, Value> = match file {
        Some(t) => match serde_json::to_value(t).map_err(|e| ConfigError(e.to_string()))? {
            Value::Object(m) => m,
            _ => Map::new(),
        },
        None => Map::new(),
    };
    if let Some(kind) = &flags.kind {
        if map.get("kind").and_then(Value::as_str) != Some(kind.as_str()) {
            map.clear();
        }
        map.insert("kind".into(), Value::String(kind.clone()));
    }
    if !map.contains_key("kind") {
        return Err(ConfigError(
            "no model given; pass --model or a [model] table with a kind".into(),
        ));
    }
    let mut set = |k: &str, v: Value| {
        map.insert(k.into(), v);
    };
    if let Some(v) = flags.n {
        set("n", v.into());
    }
    if let Some(v) = flags.m {
        set("m", v.into());
    }
    if let Some(v) = &flags.counts {
        set("counts", v.clone().into());
    }
    if let Some(v) = flags.amplitude {
        set("amplitude", v.into());
    }
    if let Some(v) = flags.alpha {
        set("alpha", v.into());
    }
    if let Some(v) = flags.beta {
        set("beta", v.into());
    }
    if let Some(v) = flags.samples {
        set("samples", v.into());
    }
    if let Some(v) = flags.ansatz {
        set("ansatz", serde_json::to_value(v).expect("enum"));
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| ConfigError(format!("model: {e}")))
}

pub fn resolve(
    operation: Operation,
    global: &GlobalOverrides,
    model: &ModelOverrides,
    sweep: &SweepConfig,
) -> Result<RunConfig, ConfigError> {
    let file = match &global.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    let t = global
        .t
        .clone()
        .or(file.t)
        .unwrap_or_else(|| operation.default_ts());
    if t.is_empty() {
        return Err(ConfigError("the t-list is empty".into()));
    }
    if t.iter().any(|t| !t.is_finite()) {
        return Err(ConfigError("t values must be finite".into()));
    }
    let tol = global
        .tol
        .or(file.tol)
        .unwrap_or_else(|| operation.default_tol());
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ConfigError(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let seed = global.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let out = global
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("gylab-out"));
    let (model, sweep) = if operation == Operation::HopfSweep {
        let fs = file.sweep.unwrap_or_default();
        let n = sweep.n.or(fs.n).unwrap_or(2);
        if n < 2 {
            return Err(ConfigError(format!("hopf-sweep needs n >= 2, got {n}")));
        }
        let count = sweep.count.or(fs.count).unwrap_or(21);
        if count == 0 {
            return Err(ConfigError("hopf-sweep needs at least one ratio".into()));
        }
        let step = sweep.step.or(fs.step).unwrap_or(0.1);
        let ansatz = sweep.ansatz.or(fs.ansatz).unwrap_or_default();
        (
            None,
            Some(Sweep {
                n,
                count,
                step,
                ansatz,
            }),
        )
    } else {
        (Some(model_spec(file.model, model)?), None)
    };
    Ok(RunConfig {
        operation,
        model,
        sweep,
        t,
        seed,
        tol,
        out,
    })
}
