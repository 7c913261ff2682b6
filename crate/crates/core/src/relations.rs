//! Numerical witnesses for the equivalences among Gauduchon curvatures and the
//! integrated flatness identities.
//!
//! Equivalences are global statements; a scan can only exhibit witnesses and check the
//! implications on the model at hand, so findings read "consistent with", never "verified".

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::conformal;
use crate::curvature::{self, GauduchonParam};
use crate::error::Result;
use crate::field::CurvatureField;
use crate::metric::{self, MetricField};

#[derive(Debug, Clone, Copy)]
pub struct RelationOptions {
    /// absolute tolerance for "equal" curvatures and vanishing residuals
    pub tol: f64,
    /// relative tolerance for quadrature identities
    pub quad_tol: f64,
}

impl Default for RelationOptions {
    fn default() -> Self {
        RelationOptions {
            tol: 1e-8,
            quad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRow {
    pub t1: f64,
    pub t2: f64,
    pub scalar_diff: f64,
    pub second_scalar_diff: f64,
    pub ricci_diff: f64,
    pub tensor_diff: f64,
    /// t1 ≠ t2 and t1 + t2 ≠ 2, where tensor equality is equivalent to Kähler
    pub kahler_criterion_applies: bool,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finding {
    ConsistentWith,
    Inconsistent,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub statement: String,
    pub finding: Finding,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatnessIdentity {
    pub t: f64,
    /// (2t−1)|∂*ω|² + ¼(t−1)²∫(‖T‖² + ‖T^s_s·‖²)
    pub residual_first: f64,
    /// (t²+6t−3)|∂*ω|² + (t−1)²∫‖T‖²
    pub residual_second: f64,
    pub sup_scalar: f64,
    pub sup_second_scalar: f64,
    /// |S^t|, |S^t_(2)| < tol everywhere; the residuals mean nothing otherwise
    pub hypothesis_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeRow {
    pub t: f64,
    pub degree: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationReport {
    pub ts: Vec<f64>,
    pub pairs: Vec<PairRow>,
    pub balanced_residual: f64,
    pub kahler_residual: f64,
    /// sup of the pointwise norm ‖T‖
    pub torsion_sup: f64,
    /// ∫‖T‖² dμ, periodic grids only
    pub torsion_l2: Option<f64>,
    /// ∫‖T^s_s·‖² dμ
    pub torsion_trace_l2: Option<f64>,
    /// |∂*ω|² in L²
    pub codifferential_l2: Option<f64>,
    /// Γ^t of the volume-one class representative; empty off Gauduchon or on point clouds
    pub degrees: Vec<DegreeRow>,
    pub degree_slope: Option<f64>,
    /// largest deviation of Γ^t from its least-squares line
    pub degree_affine_defect: Option<f64>,
    pub flatness: Vec<FlatnessIdentity>,
    pub verdicts: Vec<Verdict>,
    pub tol: f64,
}

impl RelationReport {
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("t1,t2,scalar_diff,second_scalar_diff,ricci_diff,tensor_diff,kahler_criterion_applies,tol\n");
        for r in &self.pairs {
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{},{:e}\n",
                r.t1,
                r.t2,
                r.scalar_diff,
                r.second_scalar_diff,
                r.ricci_diff,
                r.tensor_diff,
                r.kahler_criterion_applies,
                r.tol
            ));
        }
        out
    }
}

struct Integrals {
    torsion: f64,
    torsion_trace: f64,
    codifferential: f64,
}

fn integrals(g: &MetricField) -> Result<Option<Integrals>> {
    if !g.grid().is_periodic() {
        return Ok(None);
    }
    let n = g.n();
    let tor = curvature::chern_torsion(g)?;
    let (xi, _) = curvature::codifferential_omega(g)?;
    let xi2: Vec<f64> = (0..g.len())
        .map(|k| {
            let inv = g.inv_at(k);
            let mut s = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    s += inv[i * n + j] * xi.comps[i][k] * xi.comps[j][k].conj();
                }
            }
            s.re
        })
        .collect();
    Ok(Some(Integrals {
        torsion: metric::integrate_values(&tor.norm_t, g)?,
        torsion_trace: metric::integrate_values(&tor.norm_trace, g)?,
        codifferential: metric::integrate_values(&xi2, g)?,
    }))
}

/// Both integrated identities at parameter t, with the flatness hypothesis flag.
pub fn flatness_identity(g: &MetricField, t: f64, tol: f64) -> Result<FlatnessIdentity> {
    g.grid()
        .require_periodic("the integrated flatness identities")?;
    let p = GauduchonParam::new(t, g.n())?;
    let r = curvature::curvature_tensor(g, p)?;
    let s = curvature::scalar_curvature(g, p)?;
    let s2 = curvature::second_scalar_from(g, &r);
    let ints = integrals(g)?.expect("periodic grid");
    Ok(flatness_from(t, s.max_abs(), s2.max_abs(), &ints, tol))
}

fn flatness_from(t: f64, sup_s: f64, sup_s2: f64, ints: &Integrals, tol: f64) -> FlatnessIdentity {
    let x = ints.codifferential;
    FlatnessIdentity {
        t,
        residual_first: (2.0 * t - 1.0) * x
            + 0.25 * (t - 1.0).powi(2) * (ints.torsion + ints.torsion_trace),
        residual_second: (t * t + 6.0 * t - 3.0) * x + (t - 1.0).powi(2) * ints.torsion,
        sup_scalar: sup_s,
        sup_second_scalar: sup_s2,
        hypothesis_holds: sup_s < tol && sup_s2 < tol,
    }
}

fn fit_line(rows: &[DegreeRow]) -> Option<(f64, f64)> {
    if rows.len() < 2 {
        return None;
    }
    let m = rows.len() as f64;
    let tm = rows.iter().map(|r| r.t).sum::<f64>() / m;
    let dm = rows.iter().map(|r| r.degree).sum::<f64>() / m;
    let stt: f64 = rows.iter().map(|r| (r.t - tm).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let slope = rows
        .iter()
        .map(|r| (r.t - tm) * (r.degree - dm))
        .sum::<f64>()
        / stt;
    let defect = rows
        .iter()
        .map(|r| (r.degree - dm - slope * (r.t - tm)).abs())
        .fold(0.0, f64::max);
    Some((slope, defect))
}

pub fn relation_scan(g: &MetricField, ts: &[f64], opts: RelationOptions) -> Result<RelationReport> {
    let n = g.n();
    let params = ts
        .iter()
        .map(|&t| GauduchonParam::new(t, n))
        .collect::<Result<Vec<_>>>()?;
    let mut tensors: Vec<CurvatureField> = Vec::with_capacity(ts.len());
    let mut ricci = Vec::with_capacity(ts.len());
    let mut scal = Vec::with_capacity(ts.len());
    let mut scal2 = Vec::with_capacity(ts.len());
    for &p in &params {
        let r = curvature::curvature_tensor(g, p)?;
        scal2.push(curvature::second_scalar_from(g, &r).re());
        let ric = curvature::ricci_form(g, p)?;
        scal.push(curvature::trace(g, &ric).re());
        ricci.push(ric);
        tensors.push(r);
    }
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let mut pairs = Vec::new();
    for a in 0..ts.len() {
        for b in a + 1..ts.len() {
            pairs.push(PairRow {
                t1: ts[a],
                t2: ts[b],
                scalar_diff: diff(&scal[a], &scal[b]),
                second_scalar_diff: diff(&scal2[a], &scal2[b]),
                ricci_diff: ricci[a].max_diff(&ricci[b]),
                tensor_diff: tensors[a].max_diff(&tensors[b]),
                kahler_criterion_applies: ts[a] != ts[b] && (ts[a] + ts[b] - 2.0).abs() > 1e-12,
                tol: opts.tol,
            });
        }
    }
    let torsion = curvature::chern_torsion(g)?;
    let balanced_residual = torsion.theta.max_abs();
    let kahler_residual = curvature::kahler_residual(g)?;
    let torsion_sup = torsion
        .norm_t
        .iter()
        .fold(0.0f64, |m, v| m.max(v.max(0.0).sqrt()));
    let ints = integrals(g)?;

    let mut degrees = Vec::new();
    if ints.is_some() && conformal::is_gauduchon(g)? {
        let eta = conformal::normalize_volume(g)?;
        for &p in &params {
            degrees.push(DegreeRow {
                t: p.t,
                degree: conformal::gauduchon_degree(&eta, p)?,
            });
        }
    }
    let line = fit_line(&degrees);

    let mut flatness = Vec::new();
    if let Some(ints) = &ints {
        for (k, &t) in ts.iter().enumerate() {
            let sup_s = scal[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sup_s2 = scal2[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            flatness.push(flatness_from(t, sup_s, sup_s2, ints, opts.tol));
        }
    }

    let distinct: Vec<&PairRow> = pairs.iter().filter(|r| r.t1 != r.t2).collect();
    let mut verdicts = Vec::new();
    let balanced = balanced_residual < opts.tol;
    verdicts.push(if distinct.is_empty() {
        na("balanced iff S^t1 = S^t2", "needs two distinct parameters")
    } else {
        let equal = distinct.iter().all(|r| r.scalar_diff < opts.tol);
        judge(
            "balanced iff S^t1 = S^t2",
            balanced == equal,
            format!("balanced residual {balanced_residual:.3e}; scalar curvatures equal across all pairs: {equal}"),
        )
    });
    let applicable: Vec<&PairRow> = pairs
        .iter()
        .filter(|r| r.kahler_criterion_applies)
        .collect();
    let kahler = kahler_residual < opts.tol;
    verdicts.push(if applicable.is_empty() {
        na("Kähler iff R^t1 = R^t2 (t1 + t2 ≠ 2)", "no admissible parameter pair")
    } else {
        let equal = applicable.iter().all(|r| r.tensor_diff < opts.tol);
        judge(
            "Kähler iff R^t1 = R^t2 (t1 + t2 ≠ 2)",
            kahler == equal,
            format!("Kähler residual {kahler_residual:.3e}; tensors equal across admissible pairs: {equal}"),
        )
    });
    verdicts.push(match line {
        Some((slope, defect)) => judge(
            "Γ^t is affine and non-decreasing in t",
            slope >= -opts.tol && defect < opts.tol.max(1e-8 * slope.abs()),
            format!("slope {slope:.10e}; affine defect {defect:.3e}"),
        ),
        None => na(
            "Γ^t is affine and non-decreasing in t",
            "needs a Gauduchon metric on a periodic grid and two parameters",
        ),
    });
    verdicts.push(match &ints {
        Some(i) => {
            let rel = (i.torsion_trace - i.codifferential).abs() / i.codifferential.abs().max(1.0);
            judge(
                "∫‖T^s_s·‖² dμ = |∂*ω|²",
                rel < opts.quad_tol,
                format!(
                    "{:.12e} vs {:.12e}, relative gap {rel:.3e}",
                    i.torsion_trace, i.codifferential
                ),
            )
        }
        None => na("∫‖T^s_s·‖² dμ = |∂*ω|²", "integrals need a periodic grid"),
    });

    Ok(RelationReport {
        ts: ts.to_vec(),
        pairs,
        balanced_residual,
        kahler_residual,
        torsion_sup,
        torsion_l2: ints.as_ref().map(|i| i.torsion),
        torsion_trace_l2: ints.as_ref().map(|i| i.torsion_trace),
        codifferential_l2: ints.as_ref().map(|i| i.codifferential),
        degrees,
        degree_slope: line.map(|l| l.0),
        degree_affine_defect: line.map(|l| l.1),
        flatness,
        verdicts,
        tol: opts.tol,
    })
}

fn judge(statement: &str, ok: bool, detail: String) -> Verdict {
    let finding = if ok {
        Finding::ConsistentWith
    } else {
        Finding::Inconsistent
    };
    Verdict {
        statement: statement.into(),
        finding,
        detail,
    }
}

fn na(statement: &str, detail: &str) -> Verdict {
    Verdict {
        statement: statement.into(),
        finding: Finding::NotApplicable,
        detail: detail.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn flat_torus_is_trivially_consistent() {
        let g = models::flat_torus(2, &[4, 4, 4, 4], &[1.0; 4]).unwrap();
        let r = relation_scan(&g, &[-1.0, 0.0, 1.0], RelationOptions::default()).unwrap();
        assert!(r
            .pairs
            .iter()
            .all(|p| p.tensor_diff == 0.0 && p.scalar_diff == 0.0));
        assert!(r
            .verdicts
            .iter()
            .all(|v| v.finding == Finding::ConsistentWith));
        assert!(r
            .flatness
            .iter()
            .all(|f| f.hypothesis_holds && f.residual_first == 0.0));
    }

    #[test]
    fn affine_fit() {
        let rows: Vec<DegreeRow> = [-1.0, 0.0, 2.0]
            .iter()
            .map(|&t| DegreeRow {
                t,
                degree: 3.0 * t - 1.0,
            })
            .collect();
        let (s, d) = fit_line(&rows).unwrap();
        assert!((s - 3.0).abs() < 1e-14 && d < 1e-14);
    }

    #[test]
    fn pairs_csv_has_tolerance_column() {
        let g = models::flat_torus(1, &[4, 4], &[1.0; 2]).unwrap();
        let r = relation_scan(&g, &[0.0, 1.0], RelationOptions::default()).unwrap();
        let csv = r.pairs_csv();
        assert!(csv.lines().next().unwrap().ends_with(",tol"));
        assert_eq!(csv.lines().count(), 2);
    }
}
