//! Gauduchon–Yamabe solver: constant ∇^t-scalar curvature in a conformal class.
//!
//! The unknown f enters the metric as e^{2f/C_t} ω, so the equation reads
//! Δ^Ch_ω f + S^t(ω) = λ e^{2f/C_t}; the displayed form C_t Δ h + S = λ e^{2h} is the
//! same equation with h = f / C_t.
//!
//! Linear solves run in the space of resolved non-constant Fourier modes. Every returned
//! solution is re-checked, and refined, against freshly computed curvature of the output
//! metric rather than against the discrete operator alone.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::conformal::{self, ConformalFactor};
use crate::curvature::{self, GauduchonParam};
use crate::error::{GyError, Result};
use crate::field::ScalarField;
use crate::grid::ChartGrid;
use crate::krylov::{gmres, GmresOptions};
use crate::metric::{self, MetricField};

/// |Γ^t| below this selects the linear branch.
pub const DEGREE_ZERO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum YamabeMode {
    Linear,
    Continuity,
    Prescribed,
}

#[derive(Debug, Clone, Copy)]
pub struct YamabeOptions {
    pub gmres: GmresOptions,
    /// Newton stops when ‖GaYa‖_∞ < newton_tol · max(1, |λ|, ‖S‖_∞).
    pub newton_tol: f64,
    /// Fresh-curvature refinement stops when ‖S^t(output) − λ‖_∞ < fresh_tol · max(1, |λ|).
    pub fresh_tol: f64,
    pub max_corrections: usize,
    pub max_newton: usize,
    pub ds_initial: f64,
    pub ds_min: f64,
    /// Accept a non-Gauduchon input and treat its class as degree zero.
    pub skip_gauduchon_check: bool,
}

impl Default for YamabeOptions {
    fn default() -> Self {
        YamabeOptions {
            gmres: GmresOptions {
                tol: 1e-10,
                restart: 40,
                max_iter: 400,
            },
            newton_tol: 1e-11,
            fresh_tol: 1e-10,
            max_corrections: 8,
            max_newton: 12,
            ds_initial: 0.1,
            ds_min: 1e-4,
            skip_gauduchon_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub s: f64,
    pub newton_iters: usize,
    pub residual_inf: f64,
    pub f_inf: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub rejected_steps: usize,
    /// A-priori bound on ‖f‖_∞ along the path, when S/λ > 0 everywhere.
    pub k_bound: Option<f64>,
    pub bound_exceeded: bool,
    pub status: String,
}

impl SolverTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,newton_iters,residual_inf,f_inf,step\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:e},{:e},{}\n",
                r.s, r.newton_iters, r.residual_inf, r.f_inf, r.step
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Δ^Ch_ω on a periodic grid with a flat-coefficient Fourier preconditioner.
pub struct ChernLaplacianOp {
    grid: Arc<ChartGrid>,
    diag: Vec<(usize, Vec<f64>)>,
    off: Vec<(usize, usize, Vec<C64>)>,
    /// symbol of Δ with node-averaged coefficients; nonnegative
    mean_symbol: Vec<f64>,
}

impl ChernLaplacianOp {
    pub fn new(g: &MetricField) -> Result<Self> {
        g.grid().require_periodic("the Chern Laplacian solver")?;
        let n = g.n();
        let sp = g.grid().spectral()?;
        let len = g.len();
        let mut diag = Vec::new();
        let mut off = Vec::new();
        let mut mean = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let c = g.inv_component(i, j);
                mean[i * n + j] = c.iter().sum::<C64>() / len as f64;
                if i == j {
                    diag.push((i, c.iter().map(|v| v.re).collect()));
                } else if i < j && c.iter().any(|v| v.norm() > 0.0) {
                    off.push((i, j, c));
                }
            }
        }
        let mean_symbol = (0..len)
            .map(|m| {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        s += mean[i * n + j] * sp.symbol_dz(i)[m] * sp.symbol_dzbar(j)[m];
                    }
                }
                -2.0 * s.re
            })
            .collect();
        Ok(ChernLaplacianOp {
            grid: g.grid().clone(),
            diag,
            off,
            mean_symbol,
        })
    }

    fn sp(&self) -> &crate::spectral::Spectral {
        self.grid.spectral().expect("periodic grid")
    }

    pub fn len(&self) -> usize {
        self.mean_symbol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_symbol.is_empty()
    }

    /// Δv = −2 g^{ij̄} ∂_i∂̄_j v for real v.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let sp = self.sp();
        let fh = sp.forward_real(v);
        let mut out = vec![0.0; v.len()];
        for (i, c) in &self.diag {
            let w = sp.apply2(&fh, sp.symbol_dz(*i), sp.symbol_dzbar(*i));
            for ((o, w), c) in out.iter_mut().zip(&w).zip(c) {
                *o += c * w.re;
            }
        }
        for (i, j, c) in &self.off {
            let w = sp.apply2(&fh, sp.symbol_dz(*i), sp.symbol_dzbar(*j));
            for ((o, w), c) in out.iter_mut().zip(&w).zip(c) {
                *o += 2.0 * (c * w).re;
            }
        }
        out.iter_mut().for_each(|o| *o *= -2.0);
        out
    }

    /// (σ + shift)⁻¹ in Fourier space; with `project` the constant and unresolved modes are dropped.
    fn precondition(&self, v: &[f64], scale: f64, shift: f64, project: bool) -> Vec<f64> {
        let sp = self.sp();
        let mut fh = sp.forward_real(v);
        let resolved = sp.resolved();
        for (m, x) in fh.iter_mut().enumerate() {
            let d = scale * self.mean_symbol[m] + shift;
            if (project && (m == 0 || !resolved[m])) || d == 0.0 {
                *x = C64::new(0.0, 0.0);
            } else {
                *x /= d;
            }
        }
        sp.inverse(fh).into_iter().map(|c| c.re).collect()
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        self.sp().project_resolved(v)
    }

    /// Solves scale · Δ x = rhs on resolved non-constant modes.
    pub fn solve_projected(
        &self,
        rhs: &[f64],
        scale: f64,
        opts: GmresOptions,
    ) -> Result<(Vec<f64>, usize)> {
        let b = self.project(rhs);
        let mut x = vec![0.0; b.len()];
        let out = gmres(
            |v: &[f64]| self.project(&self.apply(v).iter().map(|x| x * scale).collect::<Vec<_>>()),
            |v: &[f64]| self.precondition(v, scale, 0.0, true),
            &b,
            &mut x,
            opts,
        );
        if !out.converged {
            return Err(GyError::Solver(format!(
                "linear solve stalled at relative residual {:.3e} after {} iterations",
                out.relative_residual, out.iterations
            )));
        }
        Ok((x, out.iterations))
    }

    /// Solves (scale · Δ + c(x)) y = rhs, on the full space or on the resolved modes only.
    pub fn solve_shifted(
        &self,
        rhs: &[f64],
        scale: f64,
        c: &[f64],
        resolved_only: bool,
        opts: GmresOptions,
    ) -> Result<(Vec<f64>, usize)> {
        let cmean = c.iter().sum::<f64>() / c.len() as f64;
        let filter = |v: Vec<f64>| {
            if resolved_only {
                self.sp().drop_unresolved(&v)
            } else {
                v
            }
        };
        let b = filter(rhs.to_vec());
        let mut x = vec![0.0; rhs.len()];
        let out = gmres(
            |v: &[f64]| {
                filter(
                    self.apply(v)
                        .iter()
                        .zip(v)
                        .zip(c)
                        .map(|((a, v), c)| scale * a + c * v)
                        .collect(),
                )
            },
            |v: &[f64]| filter(self.precondition(v, scale, cmean, false)),
            &b,
            &mut x,
            opts,
        );
        if !out.converged {
            return Err(GyError::Solver(format!(
                "Newton system stalled at relative residual {:.3e} after {} iterations",
                out.relative_residual, out.iterations
            )));
        }
        Ok((x, out.iterations))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn real_field(grid: &Arc<ChartGrid>, v: Vec<f64>) -> ScalarField {
    ScalarField::from_real(grid.clone(), v).expect("grid length")
}

fn check_critical(p: GauduchonParam) -> Result<()> {
    if p.is_critical() {
        return Err(GyError::CriticalParameter { t: p.t, n: p.n });
    }
    Ok(())
}

/// Outcome of a Yamabe solve, relative to the input metric.
#[derive(Debug, Clone)]
pub struct YamabeSolution {
    pub mode: YamabeMode,
    pub param: GauduchonParam,
    /// Γ^t of the class, when it was computed
    pub degree: Option<f64>,
    pub lambda: f64,
    /// metric e^{2f/C_t} ω in Yamabe convention
    pub factor: ConformalFactor,
    pub metric: MetricField,
    /// ‖S^t(metric) − λ‖_∞ with freshly computed curvature
    pub residual_fresh: f64,
    /// ‖Δf + S − λ e^{2f/C_t}‖_∞ with the discrete operator of the input metric
    pub residual_equation: f64,
    pub corrections: usize,
    pub trace: SolverTrace,
}

/// Fresh-curvature refinement of the affine problem e^u S^t(e^u η) = target.
/// Returns (u, residual, passes, GMRES iterations).
fn affine_refine(
    eta: &MetricField,
    p: GauduchonParam,
    target: f64,
    opts: &YamabeOptions,
) -> Result<(Vec<f64>, f64, usize, usize)> {
    let op = ChernLaplacianOp::new(eta)?;
    let grid = eta.grid().clone();
    let half_c = 0.5 * p.c_t();
    let mut u = vec![0.0; eta.len()];
    let mut best = (u.clone(), f64::INFINITY);
    let mut its = 0;
    let scale = target.abs().max(1.0);
    for pass in 0..=opts.max_corrections {
        let m = eta.conformal(&real_field(&grid, u.clone()))?;
        let s = curvature::scalar_curvature(&m, p)?.re();
        let res = s
            .iter()
            .zip(&u)
            .map(|(s, u)| (s - target * (-u).exp()).abs())
            .fold(0.0, f64::max);
        if res < best.1 {
            best = (u.clone(), res);
        } else {
            return Ok((best.0, best.1, pass - 1, its));
        }
        if res < opts.fresh_tol * scale || pass == opts.max_corrections {
            return Ok((best.0, best.1, pass, its));
        }
        let w: Vec<f64> = s
            .iter()
            .zip(&u)
            .map(|(s, u)| -(u.exp() * s - target))
            .collect();
        let (d, k) = op.solve_projected(&w, half_c, opts.gmres)?;
        its += k;
        u.iter_mut().zip(&d).for_each(|(u, d)| *u += d);
    }
    Ok((best.0, best.1, opts.max_corrections, its))
}

/// Constant c with ∫ e^{u+c} dμ_η = ∫ dμ_η.
fn volume_shift(eta: &MetricField, u: &[f64]) -> Result<f64> {
    let e: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    Ok((metric::volume(eta)? / metric::integrate_values(&e, eta)?).ln())
}

fn class_degree(eta: &MetricField, p: GauduchonParam) -> Result<f64> {
    conformal::gauduchon_degree(&conformal::normalize_volume(eta)?, p)
}

/// Linear branch: Δ^Ch_η f = −S^t(η) for a degree-zero class.
pub fn solve_linear(
    eta: &MetricField,
    p: GauduchonParam,
    opts: &YamabeOptions,
) -> Result<YamabeSolution> {
    check_critical(p)?;
    eta.grid().require_periodic("the Yamabe solver")?;
    let degree = if opts.skip_gauduchon_check {
        None
    } else {
        let d = class_degree(eta, p)?;
        if d.abs() >= DEGREE_ZERO_TOL {
            return Err(GyError::WrongBranch(format!(
                "linear branch needs Γ^t = 0, got {d:.6e}"
            )));
        }
        Some(d)
    };
    let (mut u, residual_fresh, corrections, _) = affine_refine(eta, p, 0.0, opts)?;
    let c = volume_shift(eta, &u)?;
    u.iter_mut().for_each(|v| *v += c);
    let residual_fresh = residual_fresh * (-c).exp();
    finish(
        eta,
        p,
        YamabeMode::Linear,
        degree,
        0.0,
        u,
        residual_fresh,
        corrections,
        SolverTrace::default(),
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    eta: &MetricField,
    p: GauduchonParam,
    mode: YamabeMode,
    degree: Option<f64>,
    lambda: f64,
    u: Vec<f64>,
    residual_fresh: f64,
    corrections: usize,
    trace: SolverTrace,
) -> Result<YamabeSolution> {
    let ct = p.c_t();
    let grid = eta.grid().clone();
    let f: Vec<f64> = u.iter().map(|u| 0.5 * ct * u).collect();
    let op = ChernLaplacianOp::new(eta)?;
    let s = curvature::scalar_curvature(eta, p)?.re();
    let lap = op.apply(&f);
    let residual_equation = (0..f.len())
        .map(|k| (lap[k] + s[k] - lambda * (2.0 * f[k] / ct).exp()).abs())
        .fold(0.0, f64::max);
    let factor = ConformalFactor::yamabe(real_field(&grid, f), ct)?;
    let metric = conformal::conformal_scale(eta, &factor)?;
    Ok(YamabeSolution {
        mode,
        param: p,
        degree,
        lambda,
        factor,
        metric,
        residual_fresh,
        residual_equation,
        corrections,
        trace,
    })
}

/// Conformal change of a class with C_t Γ^t < 0 to a metric with C_t S^t < 0 pointwise.
/// Returns the volume-one η, the exponent u and the new metric e^u η.
pub fn sign_normalize(
    eta: &MetricField,
    p: GauduchonParam,
    opts: &YamabeOptions,
) -> Result<(MetricField, Vec<f64>, MetricField)> {
    check_critical(p)?;
    let eta = conformal::normalize_volume(eta)?;
    let degree = conformal::gauduchon_degree(&eta, p)?;
    if !(p.c_t() * degree < 0.0) || degree.abs() < DEGREE_ZERO_TOL {
        return Err(GyError::WrongBranch(format!(
            "sign normalization needs C_t Γ^t < 0, got C_t = {}, Γ^t = {degree:.6e}",
            p.c_t()
        )));
    }
    let (mut u, _, _, _) = affine_refine(&eta, p, degree, opts)?;
    let c = volume_shift(&eta, &u)?;
    u.iter_mut().for_each(|v| *v += c);
    let m = eta.conformal(&real_field(eta.grid(), u.clone()))?;
    let s = curvature::scalar_curvature(&m, p)?.re();
    if let Some(k) = s.iter().position(|s| !(p.c_t() * s < 0.0)) {
        return Err(GyError::Solver(format!(
            "sign normalization left C_t S^t = {:.3e} at node {k}; the grid is probably too coarse",
            p.c_t() * s[k]
        )));
    }
    Ok((eta, u, m))
}

fn k_bound(s: &[f64], lambda: f64, ct: f64) -> Option<f64> {
    let ratios: Vec<f64> = s.iter().map(|s| s / lambda).collect();
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return None;
    }
    let lo = ratios.iter().fold(1.0f64, |m, r| m.min(*r));
    let hi = ratios.iter().fold(1.0f64, |m, r| m.max(*r));
    Some((0.5 * ct * lo.ln()).abs().max((0.5 * ct * hi.ln()).abs()))
}

struct ContinuationPath<'a> {
    op: &'a ChernLaplacianOp,
    s: &'a [f64],
    lambda: f64,
    ct: f64,
}

impl ContinuationPath<'_> {
    fn residual(&self, sp: f64, f: &[f64]) -> Vec<f64> {
        let lap = self.op.apply(f);
        (0..f.len())
            .map(|k| {
                lap[k] + sp * self.s[k] - self.lambda * (2.0 * f[k] / self.ct).exp()
                    + self.lambda * (1.0 - sp)
            })
            .collect()
    }

    /// Damped Newton at fixed s. Returns (f, iterations, residual) or None on failure.
    fn newton(
        &self,
        sp: f64,
        f0: &[f64],
        tol: f64,
        opts: &YamabeOptions,
    ) -> Result<Option<(Vec<f64>, usize, f64)>> {
        let mut f = f0.to_vec();
        let mut r = self.residual(sp, &f);
        let mut rn = max_abs(&r);
        for it in 0..=opts.max_newton {
            if rn < tol {
                return Ok(Some((f, it, rn)));
            }
            if it == opts.max_newton {
                break;
            }
            let c: Vec<f64> = f
                .iter()
                .map(|f| -2.0 * self.lambda / self.ct * (2.0 * f / self.ct).exp())
                .collect();
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let d = match self.op.solve_shifted(&rhs, 1.0, &c, false, opts.gmres) {
                Ok((d, _)) => d,
                Err(_) => return Ok(None),
            };
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = f.iter().zip(&d).map(|(f, d)| f + alpha * d).collect();
                let rt = self.residual(sp, &trial);
                let rtn = max_abs(&rt);
                if rtn.is_finite() && rtn <= (1.0 - 1e-4 * alpha) * rn {
                    f = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1.0 / 64.0 {
                    return Ok(None);
                }
            }
        }
        Ok(None)
    }

    fn tol(&self, opts: &YamabeOptions) -> f64 {
        opts.newton_tol * 1f64.max(self.lambda.abs()).max(max_abs(self.s))
    }

    fn run(&self, opts: &YamabeOptions) -> Result<(Vec<f64>, SolverTrace)> {
        let mut trace = SolverTrace {
            k_bound: k_bound(self.s, self.lambda, self.ct),
            ..Default::default()
        };
        let tol = self.tol(opts);
        let mut f = vec![0.0; self.s.len()];
        let mut s = 0.0;
        let mut ds = opts.ds_initial;
        let mut easy = 0;
        trace.records.push(TraceRecord {
            s: 0.0,
            newton_iters: 0,
            residual_inf: max_abs(&self.residual(0.0, &f)),
            f_inf: 0.0,
            step: 0.0,
        });
        while s < 1.0 {
            let mut target = s + ds;
            if target > 1.0 - 1e-9 {
                target = 1.0;
            }
            match self.newton(target, &f, tol, opts)? {
                Some((fnew, iters, res)) => {
                    let step = target - s;
                    s = target;
                    f = fnew;
                    let f_inf = max_abs(&f);
                    if let Some(k) = trace.k_bound {
                        if f_inf > k * 1.05 + 1e-8 {
                            trace.bound_exceeded = true;
                        }
                    }
                    trace.records.push(TraceRecord {
                        s,
                        newton_iters: iters,
                        residual_inf: res,
                        f_inf,
                        step,
                    });
                    easy = if iters <= 1 { easy + 1 } else { 0 };
                    if easy >= 2 {
                        ds *= 2.0;
                        easy = 0;
                    }
                }
                None => {
                    trace.rejected_steps += 1;
                    ds *= 0.5;
                    easy = 0;
                    if ds < opts.ds_min {
                        trace.status = format!("step below {} at s = {s}", opts.ds_min);
                        return Err(GyError::ContinuationFailure {
                            message: format!("continuation stalled at s = {s}"),
                            trace: Box::new(trace),
                        });
                    }
                }
            }
        }
        trace.status = if trace.bound_exceeded {
            "converged; a-priori bound exceeded".into()
        } else {
            "converged".into()
        };
        Ok((f, trace))
    }
}

fn check_branch(p: GauduchonParam, lambda: f64) -> Result<()> {
    check_critical(p)?;
    if !(p.c_t() * lambda < 0.0) {
        return Err(GyError::WrongBranch(format!(
            "continuity method needs C_t λ < 0, got C_t = {}, λ = {lambda}; the maximum principle does not apply",
            p.c_t()
        )));
    }
    Ok(())
}

/// Continuity path for Δf + S − λ e^{2f/C_t} = 0 with an arbitrary source S.
pub fn prescribed_solve(
    omega: &MetricField,
    s: &ScalarField,
    p: GauduchonParam,
    lambda: f64,
    opts: &YamabeOptions,
) -> Result<(ConformalFactor, SolverTrace)> {
    check_branch(p, lambda)?;
    if !s.grid().same_as(omega.grid()) {
        return Err(GyError::Shape(
            "source and metric live on different grids".into(),
        ));
    }
    s.require_real()?;
    let op = ChernLaplacianOp::new(omega)?;
    let sv = s.re();
    let path = ContinuationPath {
        op: &op,
        s: &sv,
        lambda,
        ct: p.c_t(),
    };
    let (f, trace) = path.run(opts)?;
    Ok((
        ConformalFactor::yamabe(real_field(omega.grid(), f), p.c_t())?,
        trace,
    ))
}

/// Continuity method with S = S^t(ω); ω should satisfy C_t S^t < 0.
pub fn continuity_solve(
    omega: &MetricField,
    p: GauduchonParam,
    lambda: f64,
    opts: &YamabeOptions,
) -> Result<(ConformalFactor, SolverTrace)> {
    check_branch(p, lambda)?;
    let s = curvature::scalar_curvature(omega, p)?;
    prescribed_solve(omega, &s, p, lambda, opts)
}

/// Newton on GaYa(1, ·) from an arbitrary initial guess.
pub fn newton_solve(
    omega: &MetricField,
    s: &ScalarField,
    p: GauduchonParam,
    lambda: f64,
    f0: &ScalarField,
    opts: &YamabeOptions,
) -> Result<(ConformalFactor, usize)> {
    check_branch(p, lambda)?;
    let op = ChernLaplacianOp::new(omega)?;
    let sv = s.re();
    let path = ContinuationPath {
        op: &op,
        s: &sv,
        lambda,
        ct: p.c_t(),
    };
    let o = YamabeOptions {
        max_newton: opts.max_newton.max(50),
        ..*opts
    };
    match path.newton(1.0, &f0.re(), path.tol(opts), &o)? {
        Some((f, it, _)) => Ok((
            ConformalFactor::yamabe(real_field(omega.grid(), f), p.c_t())?,
            it,
        )),
        None => Err(GyError::Solver(
            "Newton did not converge from the given initial guess".into(),
        )),
    }
}

/// ‖Δf + S − λ e^{2f/C_t}‖_∞ with the discrete Chern Laplacian of ω.
pub fn equation_residual(
    omega: &MetricField,
    s: &ScalarField,
    p: GauduchonParam,
    lambda: f64,
    f: &ScalarField,
) -> Result<f64> {
    let op = ChernLaplacianOp::new(omega)?;
    let path = ContinuationPath {
        op: &op,
        s: &s.re(),
        lambda,
        ct: p.c_t(),
    };
    Ok(max_abs(&path.residual(1.0, &f.re())))
}

/// Fresh-curvature Newton polish of e^U η towards S^t = λ.
fn nonlinear_polish(
    eta: &MetricField,
    p: GauduchonParam,
    lambda: f64,
    mut u: Vec<f64>,
    opts: &YamabeOptions,
) -> Result<(Vec<f64>, f64, usize)> {
    let op = ChernLaplacianOp::new(eta)?;
    let grid = eta.grid().clone();
    let half_c = 0.5 * p.c_t();
    let mut best = (u.clone(), f64::INFINITY);
    for pass in 0..=opts.max_corrections {
        let m = eta.conformal(&real_field(&grid, u.clone()))?;
        let s = curvature::scalar_curvature(&m, p)?.re();
        let res = s.iter().map(|s| (s - lambda).abs()).fold(0.0, f64::max);
        if res < best.1 {
            best = (u.clone(), res);
        } else {
            return Ok((best.0, best.1, pass - 1));
        }
        if res < opts.fresh_tol * lambda.abs().max(1.0) || pass == opts.max_corrections {
            return Ok((best.0, best.1, pass));
        }
        let rhs: Vec<f64> = s
            .iter()
            .zip(&u)
            .map(|(s, u)| u.exp() * (lambda - s))
            .collect();
        let c: Vec<f64> = u.iter().map(|u| -lambda * u.exp()).collect();
        let (d, _) = op.solve_shifted(&rhs, half_c, &c, true, opts.gmres)?;
        u.iter_mut().zip(&d).for_each(|(u, d)| *u += d);
    }
    Ok((best.0, best.1, opts.max_corrections))
}

/// A single solve with its branch fixed up front.
#[derive(Debug, Clone)]
pub struct YamabeProblem {
    pub metric: MetricField,
    pub param: GauduchonParam,
    pub lambda: f64,
    pub mode: YamabeMode,
    /// source term, required in prescribed mode
    pub source: Option<ScalarField>,
}

impl YamabeProblem {
    pub fn new(
        metric: MetricField,
        param: GauduchonParam,
        lambda: f64,
        mode: YamabeMode,
        source: Option<ScalarField>,
    ) -> Result<Self> {
        check_critical(param)?;
        match mode {
            YamabeMode::Linear if lambda.abs() >= DEGREE_ZERO_TOL => {
                return Err(GyError::WrongBranch(format!(
                    "linear mode needs λ = 0, got {lambda}"
                )))
            }
            YamabeMode::Continuity | YamabeMode::Prescribed => check_branch(param, lambda)?,
            _ => {}
        }
        if (mode == YamabeMode::Prescribed) != source.is_some() {
            return Err(GyError::Contract(
                "a source term goes with prescribed mode and only with it".into(),
            ));
        }
        Ok(YamabeProblem {
            metric,
            param,
            lambda,
            mode,
            source,
        })
    }

    pub fn solve(&self, opts: &YamabeOptions) -> Result<(ConformalFactor, SolverTrace)> {
        match self.mode {
            YamabeMode::Linear => {
                let sol = solve_linear(&self.metric, self.param, opts)?;
                Ok((sol.factor, sol.trace))
            }
            YamabeMode::Continuity => continuity_solve(&self.metric, self.param, self.lambda, opts),
            YamabeMode::Prescribed => prescribed_solve(
                &self.metric,
                self.source.as_ref().expect("checked in new"),
                self.param,
                self.lambda,
                opts,
            ),
        }
    }
}

/// Dispatches on the sign of C_t Γ^t and returns the constant-curvature metric of the class.
pub fn solve_yamabe(
    omega: &MetricField,
    p: GauduchonParam,
    opts: &YamabeOptions,
) -> Result<YamabeSolution> {
    check_critical(p)?;
    omega.grid().require_periodic("the Yamabe solver")?;
    if !conformal::is_gauduchon(omega)? {
        return Err(GyError::Contract(
            "the Yamabe solver needs a Gauduchon metric".into(),
        ));
    }
    let eta = conformal::normalize_volume(omega)?;
    let degree = conformal::gauduchon_degree(&eta, p)?;
    let ct = p.c_t();
    if degree.abs() < DEGREE_ZERO_TOL {
        let mut sol = solve_linear(&eta, p, opts)?;
        sol.degree = Some(degree);
        return Ok(sol);
    }
    if ct * degree > 0.0 {
        return Err(GyError::UnsupportedBranch(format!(
            "C_t Γ^t > 0 (C_t = {ct}, Γ^t = {degree:.6e}) is the open case of the problem"
        )));
    }
    let (eta, u0, omega1) = sign_normalize(&eta, p, opts)?;
    let (f, trace) = continuity_solve(&omega1, p, degree, opts)?;
    let u: Vec<f64> = u0
        .iter()
        .zip(f.f.re())
        .map(|(u, f)| u + 2.0 * f / ct)
        .collect();
    let (u, residual_fresh, corrections) = nonlinear_polish(&eta, p, degree, u, opts)?;
    finish(
        &eta,
        p,
        YamabeMode::Continuity,
        Some(degree),
        degree,
        u,
        residual_fresh,
        corrections,
        trace,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn laplacian_operator_matches_field_version() {
        let grid = models::torus_grid(2, &[16, 4, 8, 4]).unwrap();
        let g = models::pluriclosed_torus(&grid, 0.3).unwrap();
        let f = models::FourierSeries::random(vec![1.0; 4], 1, 4, 9).sample(&grid);
        let a = ChernLaplacianOp::new(&g).unwrap().apply(&f.re());
        let b = conformal::chern_laplacian(&g, &f).unwrap().re();
        assert!(a.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-11));
    }

    #[test]
    fn trivial_source_gives_zero() {
        let grid = models::torus_grid(1, &[8, 8]).unwrap();
        let g = MetricField::flat(grid.clone());
        let s = ScalarField::constant(grid, -1.0);
        let (f, trace) = prescribed_solve(
            &g,
            &s,
            GauduchonParam::chern(1),
            -1.0,
            &YamabeOptions::default(),
        )
        .unwrap();
        assert!(f.f.max_abs() < 1e-12);
        assert_eq!(trace.records.last().unwrap().s, 1.0);
    }

    #[test]
    fn csv_header() {
        assert!(SolverTrace::default()
            .to_csv()
            .starts_with("s,newton_iters,residual_inf,f_inf,step\n"));
    }
}
