//! One function per subcommand; each writes its artifacts under the output directory.

use std::path::{Path, PathBuf};

use gylab::conformal;
use gylab::curvature::{self, GauduchonParam};
use gylab::error::GyError;
use gylab::io;
use gylab::metric::MetricField;
use gylab::models::{self, Model, ModelSpec};
use gylab::relations::{self, RelationOptions};
use gylab::report::{self, Report, ReportHeader};
use gylab::toric;
use gylab::yamabe::{self, YamabeOptions};
use serde::Serialize;

use crate::config::{Operation, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Contract(String),
    Solver(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Contract(_) => 3,
            Failure::Solver(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Contract(m) => write!(f, "contract violation: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<GyError> for Failure {
    fn from(e: GyError) -> Self {
        match e {
            GyError::Solver(_) | GyError::ContinuationFailure { .. } => {
                Failure::Solver(e.to_string())
            }
            GyError::Io(_) | GyError::Json(_) => Failure::Io(e.to_string()),
            _ => Failure::Contract(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<Vec<PathBuf>, Failure>;

pub fn run(cfg: &RunConfig) -> Outcome {
    std::fs::create_dir_all(&cfg.out)?;
    match cfg.operation {
        Operation::Curvature => curvature_cmd(cfg),
        Operation::Degree => degree_cmd(cfg),
        Operation::Yamabe => yamabe_cmd(cfg),
        Operation::Cyt => cyt_cmd(cfg),
        Operation::Relations => relations_cmd(cfg),
        Operation::HopfSweep => hopf_sweep_cmd(cfg),
    }
}

fn header(cfg: &RunConfig) -> ReportHeader {
    ReportHeader::new(
        cfg.seed,
        cfg.tol,
        serde_json::to_value(cfg).expect("config serializes"),
    )
}

fn emit<T: Serialize>(cfg: &RunConfig, name: &str, body: T) -> Result<PathBuf, Failure> {
    let path = cfg.out.join(name);
    report::write_json(
        &path,
        &Report {
            header: header(cfg),
            body,
        },
    )?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn build(cfg: &RunConfig) -> Result<Model, Failure> {
    let spec: &ModelSpec = cfg.model.as_ref().expect("model resolved");
    spec.build(cfg.seed)
        .map_err(|e| Failure::Config(format!("cannot build {}: {e}", spec.name())))
}

fn metric_model(cfg: &RunConfig) -> Result<MetricField, Failure> {
    match build(cfg)? {
        Model::Metric(g) => Ok(g),
        Model::Toric(_) => Err(Failure::Contract(format!(
            "{} needs a metric model; toric bundle data only supports cyt and curvature",
            cfg.operation.name()
        ))),
    }
}

fn params(cfg: &RunConfig, n: usize) -> Result<Vec<GauduchonParam>, Failure> {
    cfg.t
        .iter()
        .map(|&t| GauduchonParam::new(t, n).map_err(|e| Failure::Config(e.to_string())))
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(*x), b.max(*x))
        })
}

#[derive(Serialize)]
struct CurvatureRow {
    t: f64,
    max_curvature: f64,
    max_ricci: f64,
    scalar_min: f64,
    scalar_max: f64,
    second_scalar_sup: f64,
    flat: bool,
    tol: f64,
}

#[derive(Serialize)]
struct CurvatureBody {
    model: String,
    /// "metric" or, for toric bundle data, "base"
    evaluated_on: &'static str,
    nodes: usize,
    kahler_residual: f64,
    balanced_residual: f64,
    rows: Vec<CurvatureRow>,
}

fn curvature_cmd(cfg: &RunConfig) -> Outcome {
    let (g, on) = match build(cfg)? {
        Model::Metric(g) => (g, "metric"),
        Model::Toric(d) => (d.base, "base"),
    };
    let mut rows = Vec::new();
    for p in params(cfg, g.n())? {
        let r = curvature::curvature_tensor(&g, p)?;
        let ric = curvature::ricci_form(&g, p)?;
        let s = curvature::trace(&g, &ric).re();
        let s2 = curvature::second_scalar_from(&g, &r).re();
        let (lo, hi) = min_max(&s);
        let max_r = r.max_abs();
        rows.push(CurvatureRow {
            t: p.t,
            max_curvature: max_r,
            max_ricci: ric.max_abs(),
            scalar_min: lo,
            scalar_max: hi,
            second_scalar_sup: sup(&s2),
            flat: max_r < cfg.tol,
            tol: cfg.tol,
        });
    }
    let mut csv = String::from(
        "t,max_curvature,max_ricci,scalar_min,scalar_max,second_scalar_sup,flat,tol\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{},{:e}\n",
            r.t,
            r.max_curvature,
            r.max_ricci,
            r.scalar_min,
            r.scalar_max,
            r.second_scalar_sup,
            r.flat,
            r.tol
        ));
    }
    let body = CurvatureBody {
        model: cfg.model.as_ref().expect("model").name().into(),
        evaluated_on: on,
        nodes: g.len(),
        kahler_residual: curvature::kahler_residual(&g)?,
        balanced_residual: curvature::balanced_residual(&g)?,
        rows,
    };
    Ok(vec![
        emit(cfg, "curvature.json", body)?,
        write_text(&cfg.out, "curvature.csv", &csv)?,
    ])
}

#[derive(Serialize)]
struct DegreeRow {
    t: f64,
    c_t: f64,
    degree: f64,
}

#[derive(Serialize)]
struct DegreeBody {
    model: String,
    gauduchon_residual: f64,
    volume: f64,
    rows: Vec<DegreeRow>,
    slope: Option<f64>,
    non_decreasing: Option<bool>,
    tol: f64,
}

fn degree_cmd(cfg: &RunConfig) -> Outcome {
    let g = metric_model(cfg)?;
    let ps = params(cfg, g.n())?;
    let (resid, scale) = conformal::gauduchon_residual_scaled(&g)?;
    if !conformal::is_gauduchon(&g)? {
        return Err(Failure::Contract(format!(
            "the Gauduchon degree needs a Gauduchon metric; residual {resid:.3e} at scale {scale:.3e}"
        )));
    }
    let volume = gylab::metric::volume(&g)?;
    let eta = conformal::normalize_volume(&g)?;
    let mut rows = Vec::new();
    for p in ps {
        rows.push(DegreeRow {
            t: p.t,
            c_t: p.c_t(),
            degree: conformal::gauduchon_degree(&eta, p)?,
        });
    }
    let slope = if rows.len() >= 2 {
        let (a, b) = (&rows[0], &rows[rows.len() - 1]);
        (b.t != a.t).then(|| (b.degree - a.degree) / (b.t - a.t))
    } else {
        None
    };
    let non_decreasing = (rows.len() >= 2).then(|| {
        let mut sorted: Vec<&DegreeRow> = rows.iter().collect();
        sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
        sorted
            .windows(2)
            .all(|w| w[1].degree >= w[0].degree - cfg.tol)
    });
    let mut csv = String::from("t,c_t,degree,tol\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{:e},{:e}\n", r.t, r.c_t, r.degree, cfg.tol));
    }
    let body = DegreeBody {
        model: cfg.model.as_ref().expect("model").name().into(),
        gauduchon_residual: resid,
        volume,
        rows,
        slope,
        non_decreasing,
        tol: cfg.tol,
    };
    Ok(vec![
        emit(cfg, "degree.json", body)?,
        write_text(&cfg.out, "degree.csv", &csv)?,
    ])
}

#[derive(Serialize)]
struct YamabeBody {
    model: String,
    t: f64,
    c_t: f64,
    branch: yamabe::YamabeMode,
    degree: Option<f64>,
    lambda: f64,
    output_scalar_min: f64,
    output_scalar_max: f64,
    residual_fresh: f64,
    discrete_equation_residual: f64,
    refinement_passes: usize,
    continuation_steps: usize,
    rejected_steps: usize,
    k_bound: Option<f64>,
    bound_exceeded: bool,
    constant_scalar: bool,
    tol: f64,
    metric_file: String,
    factor_file: String,
    trace_file: String,
}

fn yamabe_cmd(cfg: &RunConfig) -> Outcome {
    let g = metric_model(cfg)?;
    let mut written = Vec::new();
    let opts = YamabeOptions::default();
    for p in params(cfg, g.n())? {
        let stem = format!("yamabe_t{}", p.t);
        let trace_name = format!("{stem}-trace.csv");
        let sol = match yamabe::solve_yamabe(&g, p, &opts) {
            Ok(sol) => sol,
            Err(GyError::ContinuationFailure { message, trace }) => {
                write_text(&cfg.out, &trace_name, &trace.to_csv())?;
                return Err(Failure::Solver(format!(
                    "{message}; trace written to {}",
                    cfg.out.join(&trace_name).display()
                )));
            }
            Err(e) => return Err(e.into()),
        };
        let s = curvature::scalar_curvature(&sol.metric, p)?.re();
        let (lo, hi) = min_max(&s);
        let metric_name = format!("{stem}-metric.field");
        let factor_name = format!("{stem}-factor.field");
        io::write_metric(&cfg.out.join(&metric_name), &sol.metric)?;
        io::write_scalar(&cfg.out.join(&factor_name), &sol.factor.f, "f")?;
        written.push(cfg.out.join(&metric_name));
        written.push(cfg.out.join(&factor_name));
        written.push(write_text(&cfg.out, &trace_name, &sol.trace.to_csv())?);
        let body = YamabeBody {
            model: cfg.model.as_ref().expect("model").name().into(),
            t: p.t,
            c_t: p.c_t(),
            branch: sol.mode,
            degree: sol.degree,
            lambda: sol.lambda,
            output_scalar_min: lo,
            output_scalar_max: hi,
            residual_fresh: sol.residual_fresh,
            discrete_equation_residual: sol.residual_equation,
            refinement_passes: sol.corrections,
            continuation_steps: sol.trace.records.len().saturating_sub(1),
            rejected_steps: sol.trace.rejected_steps,
            k_bound: sol.trace.k_bound,
            bound_exceeded: sol.trace.bound_exceeded,
            constant_scalar: hi - lo < 1e-6,
            tol: cfg.tol,
            metric_file: metric_name,
            factor_file: factor_name,
            trace_file: trace_name,
        };
        written.push(emit(cfg, &format!("{stem}.json"), body)?);
    }
    Ok(written)
}

#[derive(Serialize)]
#[serde(untagged)]
enum CytBody {
    Toric {
        model: String,
        residual: toric::CytResidual,
        /// the trace constants c₁, c₂ the structure equations require
        expected_traces: (f64, f64),
        tol: f64,
    },
    Metric {
        model: String,
        ric_plus_inf: f64,
        metric_scale: f64,
        verdict: bool,
        tol: f64,
    },
}

fn cyt_cmd(cfg: &RunConfig) -> Outcome {
    let name = cfg.model.as_ref().expect("model").name().to_string();
    let body = match build(cfg)? {
        Model::Toric(d) => CytBody::Toric {
            model: name,
            residual: toric::cyt_residual(&d)?,
            expected_traces: (d.c1, d.c2),
            tol: toric::CYT_TOL,
        },
        Model::Metric(g) => {
            let ric = curvature::ricci_form(&g, GauduchonParam::bismut(g.n()))?.max_abs();
            let scale = g.max_abs().max(1.0);
            CytBody::Metric {
                model: name,
                ric_plus_inf: ric,
                metric_scale: scale,
                verdict: ric / scale < cfg.tol,
                tol: cfg.tol,
            }
        }
    };
    Ok(vec![emit(cfg, "cyt.json", body)?])
}

fn relations_cmd(cfg: &RunConfig) -> Outcome {
    let g = metric_model(cfg)?;
    params(cfg, g.n())?;
    let r = relations::relation_scan(
        &g,
        &cfg.t,
        RelationOptions {
            tol: cfg.tol,
            ..Default::default()
        },
    )?;
    let csv = r.pairs_csv();
    Ok(vec![
        emit(cfg, "relations.json", &r)?,
        write_text(&cfg.out, "relations.csv", &csv)?,
    ])
}

#[derive(Serialize)]
struct SweepRow {
    ratio: f64,
    ric_plus_inf: f64,
    tol: f64,
}

#[derive(Serialize)]
struct SweepBody {
    n: usize,
    expected_ratio: f64,
    argmin_ratio: f64,
    min_ric_plus: f64,
    rows: Vec<SweepRow>,
}

fn hopf_sweep_cmd(cfg: &RunConfig) -> Outcome {
    let sw = cfg.sweep.as_ref().expect("sweep resolved");
    let center = models::hopf_cyt_ratio(sw.n);
    let half = (sw.count as f64 - 1.0) / 2.0;
    let mut rows = Vec::with_capacity(sw.count);
    for k in 0..sw.count {
        let ratio = center + sw.step * (k as f64 - half);
        let g = models::hopf_metric(sw.n, 1.0, ratio, sw.ansatz, cfg.seed)?;
        let ric = curvature::ricci_form(&g, GauduchonParam::bismut(sw.n))?.max_abs();
        rows.push(SweepRow {
            ratio,
            ric_plus_inf: ric,
            tol: cfg.tol,
        });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.ric_plus_inf.total_cmp(&b.ric_plus_inf))
        .expect("nonempty");
    let mut csv = String::from("ratio,ric_plus_inf,tol\n");
    for r in &rows {
        csv.push_str(&format!("{},{:e},{:e}\n", r.ratio, r.ric_plus_inf, r.tol));
    }
    let body = SweepBody {
        n: sw.n,
        expected_ratio: center,
        argmin_ratio: best.ratio,
        min_ric_plus: best.ric_plus_inf,
        rows,
    };
    Ok(vec![
        emit(cfg, "hopf-sweep.json", body)?,
        write_text(&cfg.out, "hopf-sweep.csv", &csv)?,
    ])
}
