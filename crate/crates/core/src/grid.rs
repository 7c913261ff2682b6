//! Sampling domains in C^n.
//!
//! Real axes are interleaved as (x_1, y_1, ..., x_n, y_n) with z_i = x_i + i y_i.
//! Periodic grids store nodes row-major (last axis fastest).

use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;

use crate::error::{GyError, Result};
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Periodic {
        counts: Vec<usize>,
        periods: Vec<f64>,
    },
    PointCloud {
        points: Vec<Vec<C64>>,
        h: f64,
    },
}

#[derive(Debug)]
pub struct ChartGrid {
    n: usize,
    layout: Layout,
    spectral: OnceLock<Spectral>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    PeriodicGrid,
    PointCloud,
}

/// Builds a periodic grid on the torus with `counts[a]` nodes along real axis `a`.
pub fn make_periodic_grid(n: usize, counts: &[usize], periods: &[f64]) -> Result<Arc<ChartGrid>> {
    if n == 0 {
        return Err(GyError::InvalidGrid(
            "complex dimension must be at least 1".into(),
        ));
    }
    if counts.len() != 2 * n || periods.len() != 2 * n {
        return Err(GyError::InvalidGrid(format!(
            "expected {} axis counts and periods, got {} and {}",
            2 * n,
            counts.len(),
            periods.len()
        )));
    }
    for (a, &c) in counts.iter().enumerate() {
        if c < 4 || c % 2 != 0 {
            return Err(GyError::InvalidGrid(format!(
                "axis {a} count {c} must be even and at least 4"
            )));
        }
    }
    for (a, &p) in periods.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(GyError::InvalidGrid(format!(
                "axis {a} period {p} must be positive"
            )));
        }
    }
    Ok(Arc::new(ChartGrid {
        n,
        layout: Layout::Periodic {
            counts: counts.to_vec(),
            periods: periods.to_vec(),
        },
        spectral: OnceLock::new(),
    }))
}

/// Builds a point cloud of chart samples evaluated with centred stencils of spacing `h`.
pub fn make_point_cloud(n: usize, points: Vec<Vec<C64>>, h: f64) -> Result<Arc<ChartGrid>> {
    if n == 0 {
        return Err(GyError::InvalidGrid(
            "complex dimension must be at least 1".into(),
        ));
    }
    if points.is_empty() {
        return Err(GyError::InvalidGrid(
            "point cloud needs at least one sample".into(),
        ));
    }
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(GyError::InvalidGrid(format!(
            "sample has {} coordinates, expected {n}",
            p.len()
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(GyError::InvalidGrid(format!(
            "stencil radius {h} must be positive"
        )));
    }
    Ok(Arc::new(ChartGrid {
        n,
        layout: Layout::PointCloud { points, h },
        spectral: OnceLock::new(),
    }))
}

impl ChartGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn mode(&self) -> GridMode {
        match self.layout {
            Layout::Periodic { .. } => GridMode::PeriodicGrid,
            Layout::PointCloud { .. } => GridMode::PointCloud,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.mode() == GridMode::PeriodicGrid
    }

    /// Number of nodes (periodic) or samples (point cloud).
    pub fn len(&self) -> usize {
        match &self.layout {
            Layout::Periodic { counts, .. } => counts.iter().product(),
            Layout::PointCloud { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> Option<&[usize]> {
        match &self.layout {
            Layout::Periodic { counts, .. } => Some(counts),
            Layout::PointCloud { .. } => None,
        }
    }

    pub fn periods(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Periodic { periods, .. } => Some(periods),
            Layout::PointCloud { .. } => None,
        }
    }

    pub fn stencil_h(&self) -> Option<f64> {
        match &self.layout {
            Layout::PointCloud { h, .. } => Some(*h),
            Layout::Periodic { .. } => None,
        }
    }

    pub fn spacing(&self, axis: usize) -> Option<f64> {
        match &self.layout {
            Layout::Periodic { counts, periods } => {
                counts.get(axis).map(|&c| periods[axis] / c as f64)
            }
            Layout::PointCloud { .. } => None,
        }
    }

    /// Lebesgue measure of one grid cell.
    pub fn cell_volume(&self) -> Option<f64> {
        match &self.layout {
            Layout::Periodic { counts, periods } => Some(
                counts
                    .iter()
                    .zip(periods)
                    .map(|(&c, &p)| p / c as f64)
                    .product(),
            ),
            Layout::PointCloud { .. } => None,
        }
    }

    /// Real coordinates (x_1, y_1, ..., x_n, y_n) of a periodic node.
    pub fn real_coords(&self, node: usize) -> Vec<f64> {
        match &self.layout {
            Layout::Periodic { counts, periods } => {
                let mut out = vec![0.0; counts.len()];
                let mut rest = node;
                for a in (0..counts.len()).rev() {
                    let ia = rest % counts[a];
                    rest /= counts[a];
                    out[a] = ia as f64 * periods[a] / counts[a] as f64;
                }
                out
            }
            Layout::PointCloud { points, .. } => {
                points[node].iter().flat_map(|z| [z.re, z.im]).collect()
            }
        }
    }

    /// Complex coordinates of a node.
    pub fn point(&self, node: usize) -> Vec<C64> {
        match &self.layout {
            Layout::Periodic { .. } => {
                let r = self.real_coords(node);
                r.chunks(2).map(|xy| C64::new(xy[0], xy[1])).collect()
            }
            Layout::PointCloud { points, .. } => points[node].clone(),
        }
    }

    pub fn check_axis(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(GyError::AxisOutOfRange { axis: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// FFT machinery, built lazily on first use.
    pub fn spectral(&self) -> Result<&Spectral> {
        match &self.layout {
            Layout::Periodic { counts, periods } => Ok(self
                .spectral
                .get_or_init(|| Spectral::new(self.n, counts, periods))),
            Layout::PointCloud { .. } => Err(GyError::Unsupported(
                "spectral operations need a periodic grid".into(),
            )),
        }
    }

    pub fn require_periodic(&self, what: &str) -> Result<()> {
        if self.is_periodic() {
            Ok(())
        } else {
            Err(GyError::Unsupported(format!(
                "{what} is only available on a periodic grid"
            )))
        }
    }

    /// Two grids describe the same sampling domain.
    pub fn same_as(&self, other: &ChartGrid) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.layout == other.layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_grid_has_expected_size_and_spacing() {
        let g = make_periodic_grid(1, &[8, 8], &[1.0, 1.0]).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.spacing(0), Some(0.125));
        assert_eq!(g.cell_volume(), Some(1.0 / 64.0));
        let g2 = make_periodic_grid(2, &[8, 8, 8, 8], &[1.0; 4]).unwrap();
        assert_eq!(g2.len(), 4096);
    }

    #[test]
    fn rejects_bad_counts_and_periods() {
        assert!(make_periodic_grid(1, &[7, 8], &[1.0, 1.0]).is_err());
        assert!(make_periodic_grid(1, &[2, 8], &[1.0, 1.0]).is_err());
        assert!(make_periodic_grid(1, &[8, 8], &[0.0, 1.0]).is_err());
        assert!(make_periodic_grid(1, &[8, 8], &[1.0, -2.0]).is_err());
        assert!(make_periodic_grid(2, &[8, 8], &[1.0, 1.0]).is_err());
        assert!(make_periodic_grid(0, &[], &[]).is_err());
    }

    #[test]
    fn row_major_coordinates() {
        let g = make_periodic_grid(1, &[4, 8], &[1.0, 2.0]).unwrap();
        assert_eq!(g.real_coords(1), vec![0.0, 0.25]);
        assert_eq!(g.real_coords(8), vec![0.25, 0.0]);
        assert_eq!(g.point(9), vec![C64::new(0.25, 0.25)]);
    }

    #[test]
    fn point_cloud_validation() {
        let p = vec![vec![C64::new(1.0, 0.0)]];
        assert!(make_point_cloud(1, p.clone(), 1e-3).is_ok());
        assert!(make_point_cloud(1, p.clone(), 0.0).is_err());
        assert!(make_point_cloud(2, p, 1e-3).is_err());
        let cloud = make_point_cloud(1, vec![vec![C64::new(0.5, 0.25)]], 1e-3).unwrap();
        assert!(cloud.spectral().is_err());
        assert_eq!(cloud.real_coords(0), vec![0.5, 0.25]);
    }
}
