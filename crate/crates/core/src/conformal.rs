//! Chern Laplacian, conformal rescaling laws, Gauduchon residual and Gauduchon degree.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{self, GauduchonParam};
use crate::error::{GyError, Result};
use crate::field::{ScalarField, TwoFormField};
use crate::metric::{self, MetricField};
use crate::stencil;

/// Relative tolerance of the Gauduchon check, multiplied by the field scale.
pub const GAUDUCHON_TOL: f64 = 1e-8;
/// Allowed deviation of ∫dμ from one for the degree.
pub const VOLUME_TOL: f64 = 1e-10;

/// How the stored function enters the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FactorConvention {
    /// metric e^{f} g
    Metric,
    /// metric e^{2f/C_t} ω, the parametrization of the continuity method
    Yamabe { c_t: f64 },
}

#[derive(Debug, Clone)]
pub struct ConformalFactor {
    pub f: ScalarField,
    pub convention: FactorConvention,
}

impl ConformalFactor {
    pub fn metric(f: ScalarField) -> Result<Self> {
        f.require_real()?;
        check_finite(&f)?;
        Ok(ConformalFactor {
            f,
            convention: FactorConvention::Metric,
        })
    }

    pub fn yamabe(f: ScalarField, c_t: f64) -> Result<Self> {
        f.require_real()?;
        check_finite(&f)?;
        if c_t == 0.0 {
            return Err(GyError::Contract("Yamabe exponent needs C_t != 0".into()));
        }
        Ok(ConformalFactor {
            f,
            convention: FactorConvention::Yamabe { c_t },
        })
    }

    /// The exponent u with metric e^u g.
    pub fn exponent(&self) -> ScalarField {
        match self.convention {
            FactorConvention::Metric => self.f.clone(),
            FactorConvention::Yamabe { c_t } => scale_field(&self.f, 2.0 / c_t),
        }
    }
}

fn check_finite(f: &ScalarField) -> Result<()> {
    if let Some(k) = f.values().iter().position(|v| !v.re.is_finite()) {
        return Err(GyError::Contract(format!(
            "conformal factor is not finite at node {k}"
        )));
    }
    Ok(())
}

fn scale_field(f: &ScalarField, c: f64) -> ScalarField {
    match f.source() {
        Some(src) => {
            let src = src.clone();
            ScalarField::from_fn(f.grid().clone(), move |z: &[C64]| src(z) * c, true)
        }
        None => ScalarField::from_real(f.grid().clone(), f.re().iter().map(|v| v * c).collect())
            .expect("same grid"),
    }
}

/// Complex Hessian ∂_i∂̄_j f, component-major with index i n + j.
pub fn ddbar(f: &ScalarField) -> Result<Vec<Vec<C64>>> {
    let grid = f.grid().clone();
    let n = grid.n();
    if grid.is_periodic() {
        let sp = grid.spectral()?;
        let fh = sp.forward(f.values());
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(sp.apply2(&fh, sp.symbol_dz(i), sp.symbol_dzbar(j)));
            }
        }
        return Ok(out);
    }
    let src = f.source().cloned().ok_or_else(|| {
        GyError::Unsupported("point-cloud function without closed form has no derivatives".into())
    })?;
    let h = grid.stencil_h().unwrap_or(1e-3);
    let per: Vec<Vec<C64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let z = grid.point(k);
            let dbar = |w: &[C64]| {
                let s = |v: &[C64]| vec![src(v)];
                let (_, db) = stencil::complex_partials(&s, w, h);
                db.into_iter().map(|c| c[0]).collect::<Vec<C64>>()
            };
            let (d, _) = stencil::complex_partials(&dbar, &z, h);
            let mut out = vec![C64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = d[i][j];
                }
            }
            out
        })
        .collect();
    Ok((0..n * n)
        .map(|c| per.iter().map(|v| v[c]).collect())
        .collect())
}

/// Δ^Ch f = −2 g^{ij̄} ∂_i ∂̄_j f.
pub fn chern_laplacian(g: &MetricField, f: &ScalarField) -> Result<ScalarField> {
    if !f.grid().same_as(g.grid()) {
        return Err(GyError::Shape(
            "function and metric live on different grids".into(),
        ));
    }
    f.require_real()?;
    let n = g.n();
    let hess = ddbar(f)?;
    let values = (0..g.len())
        .map(|k| {
            let inv = g.inv_at(k);
            let mut s = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    s += inv[i * n + j] * hess[i * n + j][k];
                }
            }
            -2.0 * s.re
        })
        .collect();
    ScalarField::from_real(g.grid().clone(), values)
}

/// e^u g for the exponent of `f`.
pub fn conformal_scale(g: &MetricField, f: &ConformalFactor) -> Result<MetricField> {
    g.conformal(&f.exponent())
}

/// S^t(e^f g) = e^{−f}(S^t(g) + ½ C_t Δ^Ch_g f).
pub fn predict_conformal_scalar(
    g: &MetricField,
    p: GauduchonParam,
    f: &ScalarField,
) -> Result<ScalarField> {
    let s = curvature::scalar_curvature(g, p)?;
    let lap = chern_laplacian(g, f)?;
    let ct = p.c_t();
    let values = (0..g.len())
        .map(|k| (-f.values()[k].re).exp() * (s.values()[k].re + 0.5 * ct * lap.values()[k].re))
        .collect();
    ScalarField::from_real(g.grid().clone(), values)
}

/// Ric^t(e^f g): the (1,1) block gains (t − nt − 1)√−1∂∂̄f, the other blocks are unchanged.
pub fn predict_conformal_ricci(
    g: &MetricField,
    p: GauduchonParam,
    f: &ScalarField,
) -> Result<TwoFormField> {
    let mut ric = curvature::ricci_form(g, p)?;
    let coef = p.t - p.n as f64 * p.t - 1.0;
    let hess = ddbar(f)?;
    for (h, d) in ric.h11.iter_mut().zip(&hess) {
        for (a, b) in h.iter_mut().zip(d) {
            *a += coef * b;
        }
    }
    Ok(ric)
}

/// Returns max|∂∂̄ω^{n−1}| through its single top-degree coefficient
/// Σ_{ij} ∂_i∂̄_j(det g · g^{ij̄}), together with the scale max|det g · g^{ij̄}|.
pub fn gauduchon_residual_scaled(g: &MetricField) -> Result<(f64, f64)> {
    g.grid().require_periodic("the Gauduchon residual")?;
    let n = g.n();
    let sp = g.grid().spectral()?;
    let mut acc = vec![C64::new(0.0, 0.0); g.len()];
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let cof: Vec<C64> = (0..g.len())
                .map(|k| g.det()[k] * g.inv_at(k)[i * n + j])
                .collect();
            scale = cof.iter().fold(scale, |m, v| m.max(v.norm()));
            let v = sp.apply2(&sp.forward(&cof), sp.symbol_dz(i), sp.symbol_dzbar(j));
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
    Ok((acc.iter().fold(0.0, |m, v| m.max(v.norm())), scale))
}

pub fn gauduchon_residual(g: &MetricField) -> Result<f64> {
    Ok(gauduchon_residual_scaled(g)?.0)
}

pub fn is_gauduchon(g: &MetricField) -> Result<bool> {
    let (r, scale) = gauduchon_residual_scaled(g)?;
    Ok(r < GAUDUCHON_TOL * scale.max(1.0))
}

/// Γ^t = ∫ S^t(η) dμ_η for a volume-one Gauduchon metric η.
pub fn gauduchon_degree(eta: &MetricField, p: GauduchonParam) -> Result<f64> {
    let (r, scale) = gauduchon_residual_scaled(eta)?;
    if r >= GAUDUCHON_TOL * scale.max(1.0) {
        return Err(GyError::Contract(format!(
            "degree needs a Gauduchon metric; residual {r:.3e} exceeds {:.1e}",
            GAUDUCHON_TOL * scale.max(1.0)
        )));
    }
    let vol = metric::volume(eta)?;
    if (vol - 1.0).abs() > VOLUME_TOL {
        return Err(GyError::Contract(format!(
            "degree needs unit volume, got {vol}"
        )));
    }
    let s = curvature::scalar_curvature(eta, p)?;
    metric::integrate(&s, eta)
}

/// The constant multiple of g with ∫dμ = 1.
pub fn normalize_volume(g: &MetricField) -> Result<MetricField> {
    g.grid().require_periodic("volume normalization")?;
    let vol = metric::volume(g)?;
    if !(vol > 0.0 && vol.is_finite()) {
        return Err(GyError::Positivity(format!(
            "volume {vol} cannot be normalized"
        )));
    }
    g.scaled(vol.powf(-1.0 / g.n() as f64))
}

/// Closed-form wrapper so conformal factors on point clouds can be differentiated.
pub fn analytic_factor<F>(g: &MetricField, f: F) -> ScalarField
where
    F: Fn(&[C64]) -> f64 + Send + Sync + 'static,
{
    let f = Arc::new(f);
    ScalarField::from_fn(g.grid().clone(), move |z: &[C64]| C64::new(f(z), 0.0), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_periodic_grid;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_of_sine_on_flat_circle() {
        let grid = make_periodic_grid(1, &[16, 4], &[1.0, 1.0]).unwrap();
        let g = MetricField::flat(grid.clone());
        let f = ScalarField::from_fn(
            grid.clone(),
            |z: &[C64]| C64::new((2.0 * PI * z[0].re).sin(), 0.0),
            true,
        );
        let lap = chern_laplacian(&g, &f).unwrap();
        for k in 0..grid.len() {
            let x = grid.real_coords(k)[0];
            let want = 0.5 * (2.0 * PI).powi(2) * (2.0 * PI * x).sin();
            assert!((lap.values()[k].re - want).abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_flat_has_unit_volume() {
        let grid = make_periodic_grid(2, &[4; 4], &[2.0, 1.0, 1.0, 1.5]).unwrap();
        let g = normalize_volume(&MetricField::flat(grid)).unwrap();
        assert!((metric::volume(&g).unwrap() - 1.0).abs() < 1e-12);
        assert!(
            gauduchon_degree(&g, GauduchonParam::bismut(2))
                .unwrap()
                .abs()
                < 1e-12
        );
    }
}
