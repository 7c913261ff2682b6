//! Hermitian metrics sampled on a chart grid.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{GyError, Result};
use crate::field::ScalarField;
use crate::grid::ChartGrid;
use crate::linalg;
use crate::stencil;

/// Closed-form metric: returns g_{ij̄} row-major at a chart point.
pub type MetricFn = Arc<dyn Fn(&[C64]) -> Vec<C64> + Send + Sync>;

/// Smallest eigenvalue accepted before a node is declared degenerate.
pub const DEGENERATE_EIG: f64 = 1e-10;

/// First derivatives of g, node-major with index (a n + i) n + j.
#[derive(Debug, Clone)]
pub struct MetricDerivs {
    /// ∂_a g_{ij̄}
    pub dg: Vec<C64>,
    /// ∂̄_a g_{ij̄}
    pub dbg: Vec<C64>,
}

pub struct MetricField {
    grid: Arc<ChartGrid>,
    n: usize,
    g: Vec<C64>,
    ginv: Vec<C64>,
    det: Vec<f64>,
    source: Option<MetricFn>,
    derivs: OnceLock<MetricDerivs>,
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("n", &self.n)
            .field("nodes", &self.det.len())
            .field("analytic", &self.source.is_some())
            .finish()
    }
}

impl Clone for MetricField {
    fn clone(&self) -> Self {
        MetricField {
            grid: self.grid.clone(),
            n: self.n,
            g: self.g.clone(),
            ginv: self.ginv.clone(),
            det: self.det.clone(),
            source: self.source.clone(),
            derivs: self.derivs.clone(),
        }
    }
}

/// Per-node inverse g^{ij̄} (stored at i n + j, so Σ_j g^{ij̄} g_{kj̄} = δ_ik) and determinant.
///
/// Fails on the first node whose smallest eigenvalue is below [`DEGENERATE_EIG`].
/// Inverse and smallest eigenvalue, or the offending node and eigenvalue.
type NodeInverse = std::result::Result<(Vec<C64>, f64), (usize, f64)>;

pub fn hermitian_inverse(n: usize, g: &[C64]) -> Result<(Vec<C64>, Vec<f64>)> {
    let nn = n * n;
    let nodes = g.len() / nn;
    let per_node: Vec<NodeInverse> = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let gk = &g[k * nn..(k + 1) * nn];
            let min_eig = if n == 1 {
                gk[0].re
            } else {
                linalg::hermitian_eigenvalues(gk, n)[0]
            };
            if !(min_eig >= DEGENERATE_EIG) {
                return Err((k, min_eig));
            }
            match linalg::invert(gk, n) {
                Some((inv, det)) => Ok((linalg::transpose(&inv, n), det.re)),
                None => Err((k, min_eig)),
            }
        })
        .collect();
    let mut ginv = Vec::with_capacity(g.len());
    let mut det = Vec::with_capacity(nodes);
    for r in per_node {
        match r {
            Ok((inv, d)) => {
                ginv.extend(inv);
                det.push(d);
            }
            Err((node, min_eig)) => return Err(GyError::DegenerateMetric { node, min_eig }),
        }
    }
    Ok((ginv, det))
}

impl MetricField {
    /// Metric from node-major samples (row-major n×n per node).
    pub fn from_samples(grid: Arc<ChartGrid>, mut g: Vec<C64>) -> Result<Self> {
        let n = grid.n();
        let nn = n * n;
        if g.len() != nn * grid.len() {
            return Err(GyError::Shape(format!(
                "{} metric entries for {} nodes of dimension {n}",
                g.len(),
                grid.len()
            )));
        }
        for (k, gk) in g.chunks_mut(nn).enumerate() {
            let scale = gk.iter().fold(1.0f64, |m, v| m.max(v.norm()));
            let defect = linalg::hermitian_defect(gk, n);
            if !(defect <= 1e-10 * scale) {
                return Err(GyError::Contract(format!(
                    "metric not Hermitian at node {k} (defect {defect:e})"
                )));
            }
            linalg::hermitize(gk, n);
        }
        let (ginv, det) = hermitian_inverse(n, &g)?;
        Ok(MetricField {
            grid,
            n,
            g,
            ginv,
            det,
            source: None,
            derivs: OnceLock::new(),
        })
    }

    /// Metric from a closed-form function of the chart point. Point clouds keep the closure
    /// for stencil derivatives; periodic grids only sample it.
    pub fn from_fn(grid: Arc<ChartGrid>, f: MetricFn) -> Result<Self> {
        let g: Vec<C64> = (0..grid.len()).flat_map(|k| f(&grid.point(k))).collect();
        let mut m = Self::from_samples(grid, g)?;
        if !m.grid.is_periodic() {
            m.source = Some(f);
        }
        Ok(m)
    }

    pub fn flat(grid: Arc<ChartGrid>) -> Self {
        let n = grid.n();
        let mut id = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            id[i * n + i] = C64::new(1.0, 0.0);
        }
        let f: MetricFn = Arc::new(move |_: &[C64]| id.clone());
        Self::from_fn(grid, f).expect("identity metric is valid")
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.det.len()
    }

    pub fn is_empty(&self) -> bool {
        self.det.is_empty()
    }

    /// g_{ij̄} at a node, row-major.
    pub fn at(&self, node: usize) -> &[C64] {
        let nn = self.n * self.n;
        &self.g[node * nn..(node + 1) * nn]
    }

    /// g^{ij̄} at a node (index i n + j).
    pub fn inv_at(&self, node: usize) -> &[C64] {
        let nn = self.n * self.n;
        &self.ginv[node * nn..(node + 1) * nn]
    }

    pub fn samples(&self) -> &[C64] {
        &self.g
    }

    pub fn inverse(&self) -> &[C64] {
        &self.ginv
    }

    pub fn det(&self) -> &[f64] {
        &self.det
    }

    pub fn source(&self) -> Option<&MetricFn> {
        self.source.as_ref()
    }

    /// Component g_{ij̄} over all nodes.
    pub fn component(&self, i: usize, j: usize) -> Vec<C64> {
        let nn = self.n * self.n;
        self.g
            .iter()
            .skip(i * self.n + j)
            .step_by(nn)
            .copied()
            .collect()
    }

    /// Component g^{ij̄} over all nodes.
    pub fn inv_component(&self, i: usize, j: usize) -> Vec<C64> {
        let nn = self.n * self.n;
        self.ginv
            .iter()
            .skip(i * self.n + j)
            .step_by(nn)
            .copied()
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.g.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Smallest eigenvalue over all nodes.
    pub fn min_eigenvalue(&self) -> f64 {
        let nn = self.n * self.n;
        self.g
            .par_chunks(nn)
            .map(|gk| linalg::hermitian_eigenvalues(gk, self.n)[0])
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue over all nodes.
    pub fn max_eigenvalue(&self) -> f64 {
        let nn = self.n * self.n;
        self.g
            .par_chunks(nn)
            .map(|gk| *linalg::hermitian_eigenvalues(gk, self.n).last().unwrap())
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }

    /// Worst ‖g g⁻¹ − I‖ entry over nodes.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let inv = linalg::transpose(self.inv_at(k), n);
            let p = linalg::matmul(self.at(k), &inv, n);
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((p[i * n + j] - e).norm());
                }
            }
        }
        worst
    }

    /// Metric multiplied by a positive constant.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(GyError::Positivity(format!(
                "scale factor {c} must be positive"
            )));
        }
        let g: Vec<C64> = self.g.iter().map(|v| v * c).collect();
        let ginv: Vec<C64> = self.ginv.iter().map(|v| v / c).collect();
        let cn = c.powi(self.n as i32);
        let det = self.det.iter().map(|d| d * cn).collect();
        let source = self.source.clone().map(|f| -> MetricFn {
            Arc::new(move |z: &[C64]| f(z).into_iter().map(|v| v * c).collect())
        });
        let derivs = OnceLock::new();
        if let Some(d) = self.derivs.get() {
            let _ = derivs.set(MetricDerivs {
                dg: d.dg.iter().map(|v| v * c).collect(),
                dbg: d.dbg.iter().map(|v| v * c).collect(),
            });
        }
        Ok(MetricField {
            grid: self.grid.clone(),
            n: self.n,
            g,
            ginv,
            det,
            source,
            derivs,
        })
    }

    /// Metric e^{u} g for a real function u; on point clouds u must carry a closed form.
    pub fn conformal(&self, u: &ScalarField) -> Result<Self> {
        if !u.grid().same_as(&self.grid) {
            return Err(GyError::Shape(
                "conformal factor lives on another grid".into(),
            ));
        }
        u.require_real()?;
        let nn = self.n * self.n;
        let mut g = self.g.clone();
        for (k, gk) in g.chunks_mut(nn).enumerate() {
            let e = u.values()[k].re.exp();
            if !e.is_finite() {
                return Err(GyError::Positivity(format!(
                    "conformal factor overflows at node {k}"
                )));
            }
            for v in gk.iter_mut() {
                *v *= e;
            }
        }
        let mut ginv = self.ginv.clone();
        for (k, gk) in ginv.chunks_mut(nn).enumerate() {
            let e = (-u.values()[k].re).exp();
            for v in gk.iter_mut() {
                *v *= e;
            }
        }
        let nf = self.n as f64;
        let det = self
            .det
            .iter()
            .zip(u.values())
            .map(|(d, v)| d * (nf * v.re).exp())
            .collect();
        let source = match (&self.source, u.source()) {
            (Some(f), Some(uf)) => {
                let (f, uf) = (f.clone(), uf.clone());
                Some(Arc::new(move |z: &[C64]| {
                    let e = uf(z).re.exp();
                    f(z).into_iter().map(|v| v * e).collect::<Vec<_>>()
                }) as MetricFn)
            }
            (Some(_), None) => {
                return Err(GyError::Unsupported(
                    "conformal change on a point cloud needs a closed-form factor".into(),
                ))
            }
            _ => None,
        };
        Ok(MetricField {
            grid: self.grid.clone(),
            n: self.n,
            g,
            ginv,
            det,
            source,
            derivs: OnceLock::new(),
        })
    }

    /// Cached first derivatives of the metric.
    pub fn derivs(&self) -> Result<&MetricDerivs> {
        if let Some(d) = self.derivs.get() {
            return Ok(d);
        }
        let d = self.compute_derivs()?;
        Ok(self.derivs.get_or_init(|| d))
    }

    fn compute_derivs(&self) -> Result<MetricDerivs> {
        let n = self.n;
        let n3 = n * n * n;
        let nodes = self.len();
        let mut dg = vec![C64::new(0.0, 0.0); nodes * n3];
        let mut dbg = vec![C64::new(0.0, 0.0); nodes * n3];
        if self.grid.is_periodic() {
            let sp = self.grid.spectral()?;
            for i in 0..n {
                for j in 0..n {
                    let comp = self.component(i, j);
                    if comp.iter().all(|v| *v == comp[0]) {
                        continue;
                    }
                    let (d, db) = sp.gradients(&comp);
                    for a in 0..n {
                        let idx = (a * n + i) * n + j;
                        for k in 0..nodes {
                            dg[k * n3 + idx] = d[a][k];
                            dbg[k * n3 + idx] = db[a][k];
                        }
                    }
                }
            }
        } else {
            let f = self.source.as_ref().ok_or_else(|| {
                GyError::Unsupported(
                    "point-cloud metric without closed form has no derivatives".into(),
                )
            })?;
            let h = self.grid.stencil_h().unwrap_or(1e-3);
            let grid = self.grid.clone();
            dg.par_chunks_mut(n3)
                .zip(dbg.par_chunks_mut(n3))
                .enumerate()
                .for_each(|(k, (dk, dbk))| {
                    let (d, db) = stencil::complex_partials(f.as_ref(), &grid.point(k), h);
                    for a in 0..n {
                        dk[a * n * n..(a + 1) * n * n].copy_from_slice(&d[a]);
                        dbk[a * n * n..(a + 1) * n * n].copy_from_slice(&db[a]);
                    }
                });
        }
        Ok(MetricDerivs { dg, dbg })
    }
}

/// ∫ s dμ_g with dμ_g = det(g) dλ, as a periodic trapezoid sum.
pub fn integrate(s: &ScalarField, g: &MetricField) -> Result<f64> {
    g.grid().require_periodic("integration")?;
    if !s.grid().same_as(g.grid()) {
        return Err(GyError::Shape("integrand lives on another grid".into()));
    }
    let cell = g.grid().cell_volume().unwrap_or(0.0);
    Ok(s.values()
        .iter()
        .zip(g.det())
        .map(|(v, d)| v.re * d)
        .sum::<f64>()
        * cell)
}

/// Same as [`integrate`] for a plain real array.
pub fn integrate_values(s: &[f64], g: &MetricField) -> Result<f64> {
    g.grid().require_periodic("integration")?;
    let cell = g.grid().cell_volume().unwrap_or(0.0);
    Ok(s.iter().zip(g.det()).map(|(v, d)| v * d).sum::<f64>() * cell)
}

pub fn volume(g: &MetricField) -> Result<f64> {
    g.grid().require_periodic("integration")?;
    let cell = g.grid().cell_volume().unwrap_or(0.0);
    Ok(g.det().iter().sum::<f64>() * cell)
}
