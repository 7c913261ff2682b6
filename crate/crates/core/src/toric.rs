//! Calabi–Yau-with-torsion checks for rank-one toric bundles ω = π*ω_X + f θ₁∧θ₂,
//! evaluated on base-chart samples through the basic / mixed / fiber splitting of Ric^+.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::conformal::{self, ddbar};
use crate::curvature::{self, GauduchonParam};
use crate::error::{GyError, Result};
use crate::field::{FormType, OneFormField, ScalarField, TwoFormField};
use crate::metric::{MetricField, MetricFn};
use crate::stencil;

/// Tolerance of the CYT verdict, relative to ‖ω_X‖_∞.
pub const CYT_TOL: f64 = 1e-6;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Normalization of d d^c on functions, as a multiple of √−1∂∂̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DdcConvention {
    /// dd^c = √−1 ∂∂̄
    Single,
    /// dd^c = 2√−1 ∂∂̄
    Double,
}

impl DdcConvention {
    pub fn factor(self) -> f64 {
        match self {
            DdcConvention::Single => 1.0,
            DdcConvention::Double => 2.0,
        }
    }
}

/// The convention used for every reported CYT verdict.
pub const DDC: DdcConvention = DdcConvention::Single;

#[derive(Clone)]
pub struct ToricBundleData {
    pub base: MetricField,
    pub omega1: TwoFormField,
    pub omega2: TwoFormField,
    pub f: ScalarField,
    pub c1: f64,
    pub c2: f64,
    /// Closed forms of ω₁, ω₂ as Hermitian matrices, used for derivatives on point clouds.
    pub omega_sources: Option<(MetricFn, MetricFn)>,
}

impl std::fmt::Debug for ToricBundleData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToricBundleData")
            .field("n", &self.base.n())
            .field("samples", &self.base.len())
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish()
    }
}

fn check_real_11(w: &TwoFormField, name: &str) -> Result<()> {
    let n = w.n;
    let mut worst = w.max_abs_20_02();
    for i in 0..n {
        for j in 0..n {
            for (a, b) in w.h11[i * n + j].iter().zip(&w.h11[j * n + i]) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
    }
    if worst > 1e-10 {
        return Err(GyError::Contract(format!(
            "{name} is not a real (1,1)-form (defect {worst:.3e})"
        )));
    }
    Ok(())
}

impl ToricBundleData {
    pub fn new(
        base: MetricField,
        omega1: TwoFormField,
        omega2: TwoFormField,
        f: ScalarField,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        for (w, name) in [(&omega1, "ω₁"), (&omega2, "ω₂")] {
            if !w.grid.same_as(base.grid()) || w.n != base.n() {
                return Err(GyError::Shape(format!(
                    "{name} does not live on the base grid"
                )));
            }
            check_real_11(w, name)?;
        }
        if !f.grid().same_as(base.grid()) {
            return Err(GyError::Shape("f does not live on the base grid".into()));
        }
        f.require_real()?;
        if let Some(k) = f.values().iter().position(|v| !(v.re > 0.0)) {
            return Err(GyError::Positivity(format!(
                "fiber function f must be positive, fails at sample {k}"
            )));
        }
        Ok(ToricBundleData {
            base,
            omega1,
            omega2,
            f,
            c1,
            c2,
            omega_sources: None,
        })
    }

    pub fn with_sources(mut self, s1: MetricFn, s2: MetricFn) -> Self {
        self.omega_sources = Some((s1, s2));
        self
    }

    /// tr_{ω_X} ω₁ and tr_{ω_X} ω₂, normalized so that tr ω_X = n.
    pub fn traces(&self) -> (ScalarField, ScalarField) {
        (
            curvature::trace(&self.base, &self.omega1),
            curvature::trace(&self.base, &self.omega2),
        )
    }
}

/// Ric^+ of the total space split along π*Λ(X), e^j∧θ^i and θ₁∧θ₂.
#[derive(Debug, Clone)]
pub struct BismutRicciSplit {
    /// Ric^+(ω_X) − dd^c f − f(tr ω₁ ω₁ + tr ω₂ ω₂)
    pub basic: TwoFormField,
    /// (1,0) parts of the e^j∧θ^i coefficients, −∂(f tr ω_i) for i = 1, 2
    pub mixed: [OneFormField; 2],
    /// θ₁∧θ₂ coefficient; vanishes for fiber-constant f
    pub fiber: ScalarField,
}

fn hessian_form(f: &ScalarField, n: usize, factor: f64) -> Result<TwoFormField> {
    let mut t = TwoFormField::zeros(f.grid().clone(), n);
    for (c, v) in ddbar(f)?.into_iter().enumerate() {
        t.h11[c] = v.into_iter().map(|x| x * factor).collect();
    }
    Ok(t)
}

/// ∂(f tr ω_i) for both i.
fn trace_gradients(d: &ToricBundleData) -> Result<[Vec<Vec<C64>>; 2]> {
    let (t1, t2) = d.traces();
    let n = d.base.n();
    let grid = d.base.grid().clone();
    let prod = |t: &ScalarField| -> Vec<C64> {
        t.values()
            .iter()
            .zip(d.f.values())
            .map(|(a, b)| a * b.re)
            .collect()
    };
    let ft = [prod(&t1), prod(&t2)];
    if grid.is_periodic() {
        let sp = grid.spectral()?;
        let g = |v: &Vec<C64>| sp.gradients(v).0;
        return Ok([g(&ft[0]), g(&ft[1])]);
    }
    let constant = |v: &Vec<C64>| v.iter().all(|x| (x - v[0]).norm() < 1e-12);
    if constant(&ft[0]) && constant(&ft[1]) && d.f.source().is_none() && d.omega_sources.is_none() {
        let z = vec![vec![ZERO; grid.len()]; n];
        return Ok([z.clone(), z]);
    }
    let (s1, s2) = d.omega_sources.clone().ok_or_else(|| {
        GyError::Unsupported("mixed terms on a point cloud need closed forms of ω₁, ω₂".into())
    })?;
    let gsrc = d
        .base
        .source()
        .cloned()
        .ok_or_else(|| GyError::Unsupported("base metric has no closed form".into()))?;
    let fsrc = d.f.source().cloned();
    let fval = d.f.values()[0].re;
    let h = grid.stencil_h().unwrap_or(1e-3);
    let per: Vec<Vec<Vec<C64>>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let z = grid.point(k);
            let func = |w: &[C64]| {
                let g = gsrc(w);
                let inv = crate::linalg::invert(&g, n)
                    .map(|(i, _)| crate::linalg::transpose(&i, n))
                    .unwrap_or_default();
                let fv = fsrc.as_ref().map(|s| s(w).re).unwrap_or(fval);
                [&s1, &s2]
                    .iter()
                    .map(|s| {
                        let o = s(w);
                        let tr: C64 = (0..n * n).map(|c| inv[c] * o[c]).sum();
                        tr * fv
                    })
                    .collect::<Vec<C64>>()
            };
            let (dd, _) = stencil::complex_partials(&func, &z, h);
            (0..2).map(|i| (0..n).map(|j| dd[j][i]).collect()).collect()
        })
        .collect();
    let pick = |i: usize| -> Vec<Vec<C64>> {
        (0..n)
            .map(|j| per.iter().map(|p| p[i][j]).collect())
            .collect()
    };
    Ok([pick(0), pick(1)])
}

fn split_with(d: &ToricBundleData, ddc: DdcConvention) -> Result<BismutRicciSplit> {
    let n = d.base.n();
    let ric = curvature::ricci_form(&d.base, GauduchonParam::bismut(n))?;
    let hess = hessian_form(&d.f, n, ddc.factor())?;
    let (t1, t2) = d.traces();
    let mut basic = ric.combine(1.0, &hess, -1.0);
    for c in 0..n * n {
        for k in 0..d.base.len() {
            let f = d.f.values()[k].re;
            basic.h11[c][k] -=
                f * (t1.values()[k] * d.omega1.h11[c][k] + t2.values()[k] * d.omega2.h11[c][k]);
        }
    }
    let grads = trace_gradients(d)?;
    let mixed = grads.map(|g| OneFormField {
        grid: d.base.grid().clone(),
        kind: FormType::Holomorphic,
        comps: g
            .into_iter()
            .map(|c| c.into_iter().map(|v| -v).collect())
            .collect(),
    });
    // fiber slot: −(t₁(f tr ω₂) − t₂(f tr ω₁)) with zero fiber derivatives
    let fiber = ScalarField::constant(d.base.grid().clone(), 0.0);
    Ok(BismutRicciSplit {
        basic,
        mixed,
        fiber,
    })
}

pub fn bismut_ricci_total(d: &ToricBundleData) -> Result<BismutRicciSplit> {
    split_with(d, DDC)
}

#[derive(Debug, Clone, Serialize)]
pub struct CytResidual {
    /// ‖Ric^+(ω_X) − dd^c f − (c₁ω₁ + c₂ω₂)‖_∞ / ‖ω_X‖_∞ with the adopted dd^c
    pub residual_basic: f64,
    /// the same with the other dd^c normalization
    pub residual_basic_alt: f64,
    /// max_i ‖f tr ω_i − c_i‖_∞
    pub residual_trace: f64,
    pub trace1: (f64, f64),
    pub trace2: (f64, f64),
    /// tr ω_i vanishes at a sample while c_i ≠ 0
    pub trace_inconsistent: bool,
    pub ddc_variants_disagree: bool,
    pub scale: f64,
    pub verdict: bool,
}

fn basic_residual(d: &ToricBundleData, ddc: DdcConvention, ric: &TwoFormField) -> Result<f64> {
    let n = d.base.n();
    let hess = hessian_form(&d.f, n, ddc.factor())?;
    let mut r = ric.combine(1.0, &hess, -1.0);
    for c in 0..n * n {
        for k in 0..d.base.len() {
            r.h11[c][k] -= d.c1 * d.omega1.h11[c][k] + d.c2 * d.omega2.h11[c][k];
        }
    }
    Ok(r.max_abs())
}

pub fn cyt_residual(d: &ToricBundleData) -> Result<CytResidual> {
    let n = d.base.n();
    let scale = d.base.max_abs().max(f64::MIN_POSITIVE);
    let ric = curvature::ricci_form(&d.base, GauduchonParam::bismut(n))?;
    let alt = match DDC {
        DdcConvention::Single => DdcConvention::Double,
        DdcConvention::Double => DdcConvention::Single,
    };
    let residual_basic = basic_residual(d, DDC, &ric)? / scale;
    let residual_basic_alt = basic_residual(d, alt, &ric)? / scale;
    let (t1, t2) = d.traces();
    let range = |t: &ScalarField| {
        t.re()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            })
    };
    let mut residual_trace = 0.0f64;
    let mut trace_inconsistent = false;
    for (t, c) in [(&t1, d.c1), (&t2, d.c2)] {
        for (tv, fv) in t.values().iter().zip(d.f.values()) {
            residual_trace = residual_trace.max((fv.re * tv.re - c).abs());
            if tv.norm() < 1e-12 && c != 0.0 {
                trace_inconsistent = true;
            }
        }
    }
    let ddc_variants_disagree = (residual_basic - residual_basic_alt).abs() > CYT_TOL;
    let verdict = residual_basic < CYT_TOL
        && residual_trace < CYT_TOL * scale.max(1.0)
        && !trace_inconsistent;
    Ok(CytResidual {
        residual_basic,
        residual_basic_alt,
        residual_trace,
        trace1: range(&t1),
        trace2: range(&t2),
        trace_inconsistent,
        ddc_variants_disagree,
        scale,
        verdict,
    })
}

/// Given Ric^+(g) = √−1∂∂̄f₀ with n > 2, returns e^{−f₀/(n−2)} g and ‖Ric^+‖_∞ of the result.
pub fn conformal_cyt(g: &MetricField, f0: &ScalarField) -> Result<(MetricField, f64)> {
    let n = g.n();
    if n <= 2 {
        return Err(GyError::Dimension(format!(
            "conformal CYT change needs n > 2, got {n}"
        )));
    }
    let p = GauduchonParam::bismut(n);
    let before = curvature::ricci_form(g, p)?;
    let c = -1.0 / (n as f64 - 2.0);
    let u = match f0.source() {
        Some(src) => {
            let src = src.clone();
            ScalarField::from_fn(g.grid().clone(), move |z: &[C64]| src(z) * c, true)
        }
        None => ScalarField::from_real(g.grid().clone(), f0.re().iter().map(|v| v * c).collect())?,
    };
    let h = conformal::conformal_scale(g, &conformal::ConformalFactor::metric(u)?)?;
    let after = curvature::ricci_form(&h, p)?;
    let drift = before.max_diff_20_02(&after);
    if drift > 1e-6 * before.max_abs().max(1.0) {
        return Err(GyError::Contract(format!(
            "(2,0)/(0,2) Bismut Ricci changed by {drift:.3e} under a conformal change"
        )));
    }
    Ok((h, after.max_abs()))
}

/// tr ω₁ t₂f − tr ω₂ t₁f − λf, with t_i the fiber derivatives (zero when omitted).
pub fn einstein_fiber_residual(
    d: &ToricBundleData,
    lambda: f64,
    fiber: Option<(&[f64], &[f64])>,
) -> Result<ScalarField> {
    let (t1, t2) = d.traces();
    let len = d.base.len();
    if let Some((a, b)) = fiber {
        if a.len() != len || b.len() != len {
            return Err(GyError::Shape(
                "fiber derivative samples have the wrong length".into(),
            ));
        }
    }
    let values = (0..len)
        .map(|k| {
            let f = d.f.values()[k].re;
            match fiber {
                Some((a, b)) => t1.values()[k].re * b[k] - t2.values()[k].re * a[k] - lambda * f,
                None => -lambda * f,
            }
        })
        .collect();
    ScalarField::from_real(d.base.grid().clone(), values)
}

/// max over i<a, j<b of |∂_i∂̄_j g_{ab̄} − ∂_a∂̄_j g_{ib̄} − ∂_i∂̄_b g_{aj̄} + ∂_a∂̄_b g_{ij̄}|,
/// the coefficients of ∂∂̄ω.
pub fn pluriclosed_residual(g: &MetricField) -> Result<f64> {
    let n = g.n();
    if n < 2 {
        return Ok(0.0);
    }
    let n2 = n * n;
    let grid = g.grid().clone();
    // hess[(i n + j) n² + a n + b] per node: ∂_i ∂̄_j g_{ab̄}
    let hess: Vec<Vec<C64>> = if grid.is_periodic() {
        let sp = grid.spectral()?;
        let mut out = vec![vec![ZERO; n2 * n2]; g.len()];
        for c in 0..n2 {
            let comp = g.component(c / n, c % n);
            if comp.iter().all(|v| *v == comp[0]) {
                continue;
            }
            let fh = sp.forward(&comp);
            for i in 0..n {
                for j in 0..n {
                    let v = sp.apply2(&fh, sp.symbol_dz(i), sp.symbol_dzbar(j));
                    for (k, x) in v.into_iter().enumerate() {
                        out[k][(i * n + j) * n2 + c] = x;
                    }
                }
            }
        }
        out
    } else {
        let src = g
            .source()
            .cloned()
            .ok_or_else(|| GyError::Unsupported("point-cloud metric without closed form".into()))?;
        let h = grid.stencil_h().unwrap_or(1e-3);
        (0..g.len())
            .into_par_iter()
            .map(|k| {
                let z = grid.point(k);
                let inner = |w: &[C64]| stencil::complex_partials(src.as_ref(), w, h).1.concat();
                let (d, _) = stencil::complex_partials(&inner, &z, h);
                let mut out = vec![ZERO; n2 * n2];
                for i in 0..n {
                    for j in 0..n {
                        for c in 0..n2 {
                            out[(i * n + j) * n2 + c] = d[i][j * n2 + c];
                        }
                    }
                }
                out
            })
            .collect()
    };
    let at = |hk: &[C64], i: usize, j: usize, a: usize, b: usize| hk[(i * n + j) * n2 + a * n + b];
    let mut worst = 0.0f64;
    for hk in &hess {
        for i in 0..n {
            for a in i + 1..n {
                for j in 0..n {
                    for b in j + 1..n {
                        let v = at(hk, i, j, a, b) - at(hk, a, j, i, b) - at(hk, i, b, a, j)
                            + at(hk, a, b, i, j);
                        worst = worst.max(v.norm());
                    }
                }
            }
        }
    }
    Ok(worst)
}
