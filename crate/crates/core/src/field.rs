//! Per-node tensor fields. Multi-component fields are stored component-major.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{GyError, Result};
use crate::grid::ChartGrid;
use crate::stencil;

/// Closed-form scalar on the chart, used for stencil derivatives on point clouds.
pub type ScalarFn = Arc<dyn Fn(&[C64]) -> C64 + Send + Sync>;

#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<ChartGrid>,
    values: Vec<C64>,
    real: bool,
    source: Option<ScalarFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("len", &self.values.len())
            .field("real", &self.real)
            .field("analytic", &self.source.is_some())
            .finish()
    }
}

fn check_len(grid: &ChartGrid, len: usize) -> Result<()> {
    if grid.len() != len {
        return Err(GyError::Shape(format!(
            "{len} values for a grid of {} nodes",
            grid.len()
        )));
    }
    Ok(())
}

impl ScalarField {
    pub fn from_complex(grid: Arc<ChartGrid>, values: Vec<C64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(ScalarField {
            grid,
            values,
            real: false,
            source: None,
        })
    }

    pub fn from_real(grid: Arc<ChartGrid>, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        let values = values.into_iter().map(|x| C64::new(x, 0.0)).collect();
        Ok(ScalarField {
            grid,
            values,
            real: true,
            source: None,
        })
    }

    /// Samples `f` at every node. On point clouds the closure is kept for stencils.
    pub fn from_fn<F>(grid: Arc<ChartGrid>, f: F, real: bool) -> Self
    where
        F: Fn(&[C64]) -> C64 + Send + Sync + 'static,
    {
        let f: ScalarFn = Arc::new(f);
        let values = (0..grid.len())
            .map(|k| {
                let v = f(&grid.point(k));
                if real {
                    C64::new(v.re, 0.0)
                } else {
                    v
                }
            })
            .collect();
        let source = if grid.is_periodic() { None } else { Some(f) };
        ScalarField {
            grid,
            values,
            real,
            source,
        }
    }

    pub fn constant(grid: Arc<ChartGrid>, c: f64) -> Self {
        let len = grid.len();
        let source: Option<ScalarFn> = if grid.is_periodic() {
            None
        } else {
            Some(Arc::new(move |_: &[C64]| C64::new(c, 0.0)))
        };
        ScalarField {
            grid,
            values: vec![C64::new(c, 0.0); len],
            real: true,
            source,
        }
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn source(&self) -> Option<&ScalarFn> {
        self.source.as_ref()
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Marks the field real after checking the imaginary parts against `tol`.
    pub fn into_real(mut self, tol: f64) -> Result<Self> {
        let im = self.max_imag();
        if im > tol {
            return Err(GyError::Contract(format!(
                "field not real: imaginary part {im:e}"
            )));
        }
        for v in self.values.iter_mut() {
            v.im = 0.0;
        }
        self.real = true;
        Ok(self)
    }

    pub fn require_real(&self) -> Result<()> {
        if self.real {
            Ok(())
        } else {
            Err(GyError::Contract(
                "operation needs a real scalar field".into(),
            ))
        }
    }
}

/// Stencil derivative of a closed-form scalar at one point.
fn stencil_scalar(f: &ScalarFn, z: &[C64], h: f64, i: usize, bar: bool) -> C64 {
    let wrapped = |w: &[C64]| vec![f(w)];
    let (d, db) = stencil::complex_partials(&wrapped, z, h);
    if bar {
        db[i][0]
    } else {
        d[i][0]
    }
}

fn derivative(field: &ScalarField, i: usize, bar: bool) -> Result<ScalarField> {
    let grid = field.grid.clone();
    grid.check_axis(i)?;
    if grid.is_periodic() {
        let sp = grid.spectral()?;
        let values = if bar {
            sp.dzbar(&field.values, i)
        } else {
            sp.dz(&field.values, i)
        };
        return Ok(ScalarField {
            grid,
            values,
            real: false,
            source: None,
        });
    }
    let h = grid.stencil_h().unwrap_or(1e-3);
    let src = field.source.clone().ok_or_else(|| {
        GyError::Unsupported("point-cloud derivative needs a closed-form field".into())
    })?;
    let values = (0..grid.len())
        .map(|k| stencil_scalar(&src, &grid.point(k), h, i, bar))
        .collect();
    let nested: ScalarFn = Arc::new(move |z: &[C64]| stencil_scalar(&src, z, h, i, bar));
    Ok(ScalarField {
        grid,
        values,
        real: false,
        source: Some(nested),
    })
}

/// Holomorphic derivative ∂f/∂z_i.
pub fn d_z(field: &ScalarField, i: usize) -> Result<ScalarField> {
    derivative(field, i, false)
}

/// Antiholomorphic derivative ∂f/∂z̄_i.
pub fn d_zbar(field: &ScalarField, i: usize) -> Result<ScalarField> {
    derivative(field, i, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FormType {
    /// Coefficients of dz^i.
    Holomorphic,
    /// Coefficients of dz̄^i.
    Antiholomorphic,
}

#[derive(Debug, Clone)]
pub struct OneFormField {
    pub grid: Arc<ChartGrid>,
    pub kind: FormType,
    pub comps: Vec<Vec<C64>>,
}

impl OneFormField {
    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Complex conjugate form, of the opposite type.
    pub fn conj(&self) -> OneFormField {
        let kind = match self.kind {
            FormType::Holomorphic => FormType::Antiholomorphic,
            FormType::Antiholomorphic => FormType::Holomorphic,
        };
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| v.conj()).collect())
            .collect();
        OneFormField {
            grid: self.grid.clone(),
            kind,
            comps,
        }
    }
}

/// Two-form split by type.
///
/// The (1,1) block holds the Hermitian coefficients h with α^{1,1} = √−1 Σ h_{ij̄} dz^i∧dz̄^j,
/// so that ω is stored as g and the Ricci form as Ric_{ij̄}. The (2,0) and (0,2) blocks hold
/// antisymmetric c_{ij} with α^{2,0} = Σ_{i<j} c_{ij} dz^i∧dz^j, and likewise for dz̄.
#[derive(Debug, Clone)]
pub struct TwoFormField {
    pub grid: Arc<ChartGrid>,
    pub n: usize,
    pub h11: Vec<Vec<C64>>,
    pub a20: Vec<Vec<C64>>,
    pub a02: Vec<Vec<C64>>,
}

fn max_abs_blocks(b: &[Vec<C64>]) -> f64 {
    b.iter().flatten().fold(0.0, |m, v| m.max(v.norm()))
}

fn max_diff_blocks(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y))
        .fold(0.0, |m, (u, v)| m.max((u - v).norm()))
}

impl TwoFormField {
    pub fn zeros(grid: Arc<ChartGrid>, n: usize) -> Self {
        let z = vec![vec![C64::new(0.0, 0.0); grid.len()]; n * n];
        TwoFormField {
            grid,
            n,
            h11: z.clone(),
            a20: z.clone(),
            a02: z,
        }
    }

    pub fn h(&self, i: usize, j: usize) -> &[C64] {
        &self.h11[i * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_blocks(&self.h11).max(self.max_abs_20_02())
    }

    pub fn max_abs_11(&self) -> f64 {
        max_abs_blocks(&self.h11)
    }

    pub fn max_abs_20_02(&self) -> f64 {
        max_abs_blocks(&self.a20).max(max_abs_blocks(&self.a02))
    }

    pub fn max_diff(&self, other: &TwoFormField) -> f64 {
        self.max_diff_11(other).max(self.max_diff_20_02(other))
    }

    pub fn max_diff_11(&self, other: &TwoFormField) -> f64 {
        max_diff_blocks(&self.h11, &other.h11)
    }

    pub fn max_diff_20_02(&self, other: &TwoFormField) -> f64 {
        max_diff_blocks(&self.a20, &other.a20).max(max_diff_blocks(&self.a02, &other.a02))
    }

    /// Largest violation of reality: (1,1) Hermitian and (0,2) equal to conj of (2,0).
    pub fn reality_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (&self.h11[i * n + j], &self.h11[j * n + i]);
                for (u, v) in a.iter().zip(b) {
                    worst = worst.max((u - v.conj()).norm());
                }
                for (u, v) in self.a02[i * n + j].iter().zip(&self.a20[i * n + j]) {
                    worst = worst.max((u - v.conj()).norm());
                }
            }
        }
        worst
    }

    /// Componentwise a·self + b·other.
    pub fn combine(&self, a: f64, other: &TwoFormField, b: f64) -> TwoFormField {
        let mix = |x: &[Vec<C64>], y: &[Vec<C64>]| -> Vec<Vec<C64>> {
            x.iter()
                .zip(y)
                .map(|(u, v)| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect())
                .collect()
        };
        TwoFormField {
            grid: self.grid.clone(),
            n: self.n,
            h11: mix(&self.h11, &other.h11),
            a20: mix(&self.a20, &other.a20),
            a02: mix(&self.a02, &other.a02),
        }
    }
}

/// R_{ij̄kl̄} with component index ((i n + j) n + k) n + l.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub grid: Arc<ChartGrid>,
    pub n: usize,
    pub r: Vec<Vec<C64>>,
}

impl CurvatureField {
    pub fn comp(&self, i: usize, j: usize, k: usize, l: usize) -> &[C64] {
        let n = self.n;
        &self.r[((i * n + j) * n + k) * n + l]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_blocks(&self.r)
    }

    pub fn max_diff(&self, other: &CurvatureField) -> f64 {
        max_diff_blocks(&self.r, &other.r)
    }

    pub fn all_finite(&self) -> bool {
        self.r
            .iter()
            .flatten()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_periodic_grid, make_point_cloud};
    use std::f64::consts::PI;

    #[test]
    fn periodic_derivative_of_sine() {
        let g = make_periodic_grid(1, &[8, 8], &[1.0, 1.0]).unwrap();
        let f = ScalarField::from_fn(
            g.clone(),
            |z| C64::new((2.0 * PI * z[0].re).sin(), 0.0),
            true,
        );
        let d = d_z(&f, 0).unwrap();
        for k in 0..g.len() {
            let x = g.real_coords(k)[0];
            assert!((d.values()[k] - PI * (2.0 * PI * x).cos()).norm() < 1e-12);
        }
        assert!(d_z(&f, 1).is_err());
    }

    #[test]
    fn cloud_derivatives_nest() {
        let pts = vec![vec![C64::new(0.4, 0.2)], vec![C64::new(-1.0, 0.5)]];
        let g = make_point_cloud(1, pts.clone(), 1e-3).unwrap();
        // f = |z|^4, ∂∂̄ f = 4|z|^2
        let f = ScalarField::from_fn(g, |z| C64::new(z[0].norm_sqr().powi(2), 0.0), true);
        let ddb = d_z(&d_zbar(&f, 0).unwrap(), 0).unwrap();
        for (p, v) in pts.iter().zip(ddb.values()) {
            assert!((v - 4.0 * p[0].norm_sqr()).norm() < 1e-8);
        }
        let bare =
            ScalarField::from_complex(f.grid().clone(), vec![C64::new(1.0, 0.0); 2]).unwrap();
        assert!(d_z(&bare, 0).is_err());
    }

    #[test]
    fn two_form_reality() {
        let g = make_periodic_grid(1, &[4, 4], &[1.0, 1.0]).unwrap();
        let mut w = TwoFormField::zeros(g, 1);
        assert_eq!(w.reality_defect(), 0.0);
        w.h11[0][3] = C64::new(0.0, 1.0);
        assert!(w.reality_defect() > 0.5);
    }
}
