//! Model Hermitian metrics: tori (flat, conformally flat, Kähler, pluriclosed), Fubini–Study
//! charts, homogeneous Hopf metrics and Calabi–Eckmann base data.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature;
use crate::error::{GyError, Result};
use crate::field::{ScalarField, TwoFormField};
use crate::grid::{make_periodic_grid, make_point_cloud, ChartGrid};
use crate::linalg;
use crate::metric::{MetricField, MetricFn};
use crate::toric::ToricBundleData;

/// Smallest allowed ratio of the least to the largest eigenvalue at any node.
pub const EIGEN_FLOOR: f64 = 0.1;
/// Stencil step used for point-cloud models.
pub const STENCIL_H: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 20240917;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Real trigonometric series Σ a cos(2π k·x/L + φ) on the 2n real axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierSeries {
    pub periods: Vec<f64>,
    /// (wave numbers per real axis, amplitude, phase)
    pub terms: Vec<(Vec<i32>, f64, f64)>,
}

impl FourierSeries {
    pub fn single_cos(periods: Vec<f64>, axis: usize, k: i32) -> Self {
        let mut wave = vec![0; periods.len()];
        wave[axis] = k;
        FourierSeries {
            periods,
            terms: vec![(wave, 1.0, 0.0)],
        }
    }

    /// `terms` random modes with |k_a| ≤ kmax on every axis.
    pub fn random(periods: Vec<f64>, kmax: i32, terms: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = periods.len();
        let mut out = Vec::with_capacity(terms);
        while out.len() < terms {
            let k: Vec<i32> = (0..dim).map(|_| rng.gen_range(-kmax..=kmax)).collect();
            if k.iter().all(|&v| v == 0) {
                continue;
            }
            let norm2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
            let amp = rng.gen_range(-1.0..1.0) / (1.0 + norm2);
            let phase = rng.gen_range(0.0..2.0 * PI);
            out.push((k, amp, phase));
        }
        FourierSeries {
            periods,
            terms: out,
        }
    }

    fn wave(&self, k: &[i32]) -> Vec<f64> {
        k.iter()
            .zip(&self.periods)
            .map(|(&k, l)| 2.0 * PI * k as f64 / l)
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, a, ph)| {
                let th: f64 = self.wave(k).iter().zip(x).map(|(w, x)| w * x).sum();
                a * (th + ph).cos()
            })
            .sum()
    }

    pub fn eval_z(&self, z: &[C64]) -> f64 {
        self.eval(&real_coords(z))
    }

    /// ∂_i ∂̄_j of the series at x, index i n + j.
    pub fn ddbar(&self, x: &[f64]) -> Vec<C64> {
        let n = x.len() / 2;
        let mut out = vec![ZERO; n * n];
        for (k, a, ph) in &self.terms {
            let w = self.wave(k);
            let th: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
            let c = a * (th + ph).cos();
            for i in 0..n {
                for j in 0..n {
                    let ki = C64::new(w[2 * i], -w[2 * i + 1]);
                    let kj = C64::new(w[2 * j], w[2 * j + 1]);
                    out[i * n + j] -= 0.25 * c * ki * kj;
                }
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, a, p)| (k.clone(), a * c, *p))
            .collect();
        FourierSeries {
            periods: self.periods.clone(),
            terms,
        }
    }

    pub fn max_on(&self, grid: &ChartGrid) -> f64 {
        (0..grid.len())
            .map(|k| self.eval(&grid.real_coords(k)).abs())
            .fold(0.0, f64::max)
    }

    /// Samples on a grid as a real field.
    pub fn sample(&self, grid: &Arc<ChartGrid>) -> ScalarField {
        let values = (0..grid.len())
            .map(|k| self.eval(&grid.real_coords(k)))
            .collect();
        ScalarField::from_real(grid.clone(), values).expect("grid length")
    }
}

fn real_coords(z: &[C64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Random band-limited series rescaled so its maximum modulus on `grid` equals `amplitude`.
pub fn random_band_limited(
    grid: &ChartGrid,
    kmax: i32,
    terms: usize,
    amplitude: f64,
    seed: u64,
) -> Result<FourierSeries> {
    let periods = grid
        .periods()
        .ok_or_else(|| GyError::Unsupported("band-limited fields need a periodic grid".into()))?
        .to_vec();
    if let Some(c) = grid.counts() {
        if c.iter().any(|&m| kmax as usize >= m / 2) {
            return Err(GyError::InvalidGrid(format!(
                "wave number {kmax} is not resolved by counts {c:?}"
            )));
        }
    }
    let s = FourierSeries::random(periods, kmax, terms, seed);
    let m = s.max_on(grid);
    Ok(s.scaled(amplitude / m))
}

/// Positivity check: λ_min ≥ EIGEN_FLOOR · λ_max at every node.
pub fn check_floor(g: &MetricField) -> Result<()> {
    let n = g.n();
    for k in 0..g.len() {
        let ev = linalg::hermitian_eigenvalues(g.at(k), n);
        let (lo, hi) = (ev[0], ev[n - 1]);
        if !(lo >= EIGEN_FLOOR * hi) {
            return Err(GyError::Positivity(format!(
                "eigenvalues {lo:.4} / {hi:.4} at node {k} violate the floor {EIGEN_FLOOR}"
            )));
        }
    }
    Ok(())
}

pub fn torus_grid(n: usize, counts: &[usize]) -> Result<Arc<ChartGrid>> {
    make_periodic_grid(n, counts, &vec![1.0; 2 * n])
}

/// g = δ on a periodic grid.
pub fn flat_torus(n: usize, counts: &[usize], periods: &[f64]) -> Result<MetricField> {
    Ok(MetricField::flat(make_periodic_grid(n, counts, periods)?))
}

/// e^φ · flat.
pub fn conformal_torus(grid: &Arc<ChartGrid>, phi: &FourierSeries) -> Result<MetricField> {
    let g = MetricField::flat(grid.clone()).conformal(&phi.sample(grid))?;
    check_floor(&g)?;
    Ok(g)
}

/// g = δ + ε ∂∂̄ψ.
pub fn kahler_perturbed_torus(
    grid: &Arc<ChartGrid>,
    psi: &FourierSeries,
    eps: f64,
) -> Result<MetricField> {
    grid.require_periodic("a torus model")?;
    let n = grid.n();
    let mut g = Vec::with_capacity(grid.len() * n * n);
    for k in 0..grid.len() {
        let h = psi.ddbar(&grid.real_coords(k));
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { 1.0 } else { 0.0 };
                g.push(C64::new(d, 0.0) + eps * h[i * n + j]);
            }
        }
    }
    let g = MetricField::from_samples(grid.clone(), g).map_err(amplitude_error(eps))?;
    check_floor(&g).map_err(amplitude_error(eps))?;
    let r = curvature::kahler_residual(&g)?;
    if r > 1e-10 {
        return Err(GyError::Contract(format!(
            "Kähler model has dω residual {r:.3e}"
        )));
    }
    Ok(g)
}

fn amplitude_error(eps: f64) -> impl Fn(GyError) -> GyError {
    move |e| GyError::Positivity(format!("amplitude {eps} too large: {e}"))
}

/// n = 2, g_{11̄} = g_{22̄} = 1, g_{12̄} = g_{21̄} = ε sin(2πx₁).
pub fn pluriclosed_torus(grid: &Arc<ChartGrid>, eps: f64) -> Result<MetricField> {
    grid.require_periodic("a torus model")?;
    if grid.n() != 2 {
        return Err(GyError::Dimension("the pluriclosed torus has n = 2".into()));
    }
    if !(eps.abs() < 1.0) {
        return Err(GyError::Positivity(format!(
            "amplitude {eps} must be below 1"
        )));
    }
    let l = grid.periods().map(|p| p[0]).unwrap_or(1.0);
    let mut g = Vec::with_capacity(grid.len() * 4);
    for k in 0..grid.len() {
        let mu = eps * (2.0 * PI * grid.real_coords(k)[0] / l).sin();
        g.extend([
            C64::new(1.0, 0.0),
            C64::new(mu, 0.0),
            C64::new(mu, 0.0),
            C64::new(1.0, 0.0),
        ]);
    }
    let g = MetricField::from_samples(grid.clone(), g)?;
    check_floor(&g).map_err(amplitude_error(eps))?;
    Ok(g)
}

/// Fubini–Study in an affine chart: ((1+|w|²)δ − w̄_i w_j)/(1+|w|²)².
pub fn fubini_study_fn(n: usize, scale: f64) -> MetricFn {
    Arc::new(move |w: &[C64]| {
        let s = 1.0 + w.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let mut g = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { s } else { 0.0 };
                g[i * n + j] = scale * (C64::new(d, 0.0) - w[i].conj() * w[j]) / (s * s);
            }
        }
        g
    })
}

/// Seeded chart points with |w| ≤ radius; the first sample is the origin.
pub fn chart_samples(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![ZERO; n]];
    while out.len() < count {
        let w: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let r = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if r > 0.0 && r <= 1.0 {
            let s = radius * rng.gen_range(0.05..1.0);
            out.push(w.iter().map(|v| v * (s / r)).collect());
        }
    }
    out.truncate(count);
    out
}

pub fn fubini_study(n: usize, samples: Vec<Vec<C64>>, scale: f64) -> Result<MetricField> {
    if samples
        .iter()
        .any(|w| w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() >= 10.0)
    {
        return Err(GyError::InvalidGrid(
            "Fubini–Study samples must satisfy |w| < 10".into(),
        ));
    }
    let grid = make_point_cloud(n, samples, STENCIL_H)?;
    MetricField::from_fn(grid, fubini_study_fn(n, scale))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopfAnsatz {
    #[default]
    /// α δ_{ij}/|z|² + (β/2) z̄_i z_j/|z|⁴; reproduces the closed-form Bismut Ricci for every β/α
    Homogeneous,
    /// α δ_{ij}/|z|² + β z̄_i z_j/|z|⁴; agrees with the closed form only at β = 0
    Unscaled,
}

impl HopfAnsatz {
    /// Weight of β in front of z̄_i z_j/|z|⁴.
    pub fn beta_weight(self) -> f64 {
        match self {
            HopfAnsatz::Homogeneous => 0.5,
            HopfAnsatz::Unscaled => 1.0,
        }
    }
}

pub fn hopf_fn(n: usize, alpha: f64, beta: f64, ansatz: HopfAnsatz) -> MetricFn {
    let beta = beta * ansatz.beta_weight();
    Arc::new(move |z: &[C64]| {
        let r2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        let mut g = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { alpha / r2 } else { 0.0 };
                g[i * n + j] = C64::new(d, 0.0) + beta * z[i].conj() * z[j] / (r2 * r2);
            }
        }
        g
    })
}

/// Annulus samples: radii 1, 1.5, 2 times 2n² seeded unit directions.
pub fn annulus_samples(n: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<C64>> = (0..2 * n * n)
        .map(|_| {
            let v: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let r = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|c| c / r).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(3 * dirs.len());
    for r in [1.0, 1.5, 2.0] {
        for d in &dirs {
            out.push(d.iter().map(|c| c * r).collect());
        }
    }
    out
}

pub fn hopf_metric(
    n: usize,
    alpha: f64,
    beta: f64,
    ansatz: HopfAnsatz,
    seed: u64,
) -> Result<MetricField> {
    if !(alpha > 0.0 && alpha + ansatz.beta_weight() * beta > 0.0) {
        return Err(GyError::Positivity(format!(
            "Hopf metric ({alpha}, {beta}) is not positive"
        )));
    }
    let grid = make_point_cloud(n, annulus_samples(n, seed), STENCIL_H)?;
    let g = MetricField::from_fn(grid, hopf_fn(n, alpha, beta, ansatz))?;
    check_floor(&g)?;
    Ok(g)
}

/// Closed-form Bismut Ricci coefficients c (δ/|z|² − z̄_i z_j/|z|⁴), c = 2 − n + (β/α)(1 − n).
pub fn hopf_bismut_ricci(n: usize, alpha: f64, beta: f64, z: &[C64]) -> Vec<C64> {
    let c = 2.0 - n as f64 + (beta / alpha) * (1.0 - n as f64);
    let r2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 1.0 / r2 } else { 0.0 };
            out[i * n + j] = c * (C64::new(d, 0.0) - z[i].conj() * z[j] / (r2 * r2));
        }
    }
    out
}

/// Ratio β/α at which the Hopf Bismut Ricci form vanishes.
pub fn hopf_cyt_ratio(n: usize) -> f64 {
    (2.0 - n as f64) / (n as f64 - 1.0)
}

/// Block-diagonal base ((n+1)/n) FS_n ⊕ ((m+1)/m) FS_m on a chart of ℂPⁿ × ℂPᵐ with f ≡ 1.
pub fn calabi_eckmann_data(
    n: usize,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<ToricBundleData> {
    if n == 0 && m == 0 {
        return Err(GyError::Dimension(
            "Calabi–Eckmann data needs n + m ≥ 1".into(),
        ));
    }
    let (n, m) = if n == 0 { (m, 0) } else { (n, m) };
    let dim = n + m;
    let c1 = (n as f64 + 1.0) / n as f64;
    let c2 = if m > 0 {
        (m as f64 + 1.0) / m as f64
    } else {
        0.0
    };
    let f1 = fubini_study_fn(n, c1);
    let f2 = if m > 0 {
        Some(fubini_study_fn(m, c2))
    } else {
        None
    };
    let block = move |z: &[C64], which: u8| -> Vec<C64> {
        let mut g = vec![ZERO; dim * dim];
        if which & 1 != 0 {
            let a = f1(&z[..n]);
            for i in 0..n {
                for j in 0..n {
                    g[i * dim + j] = a[i * n + j];
                }
            }
        }
        if which & 2 != 0 {
            if let Some(f2) = &f2 {
                let b = f2(&z[n..]);
                for i in 0..m {
                    for j in 0..m {
                        g[(n + i) * dim + n + j] = b[i * m + j];
                    }
                }
            }
        }
        g
    };
    let block = Arc::new(block);
    let pts = chart_samples(dim, samples, 1.5, seed);
    let grid = make_point_cloud(dim, pts, STENCIL_H)?;
    let b = block.clone();
    let base = MetricField::from_fn(grid.clone(), Arc::new(move |z: &[C64]| b(z, 3)))?;
    let form = |which: u8| -> TwoFormField {
        let mut t = TwoFormField::zeros(grid.clone(), dim);
        for k in 0..grid.len() {
            let v = block(&grid.point(k), which);
            for (c, x) in v.into_iter().enumerate() {
                t.h11[c][k] = x;
            }
        }
        t
    };
    let omega1 = form(1);
    let omega2 = form(2);
    let f = ScalarField::constant(grid.clone(), 1.0);
    ToricBundleData::new(base, omega1, omega2, f, n as f64, m as f64)
}

/// Configuration-level description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    FlatTorus {
        n: usize,
        #[serde(default)]
        counts: Option<Vec<usize>>,
    },
    ConformalTorus {
        n: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        counts: Option<Vec<usize>>,
    },
    KahlerTorus {
        n: usize,
        #[serde(default = "default_kahler_eps")]
        amplitude: f64,
        #[serde(default)]
        counts: Option<Vec<usize>>,
    },
    /// Complex surface only; n is accepted so configs can state it.
    PluriclosedTorus {
        #[serde(default = "two")]
        n: usize,
        #[serde(default = "default_pluriclosed_eps")]
        amplitude: f64,
        #[serde(default)]
        counts: Option<Vec<usize>>,
    },
    FubiniStudy {
        n: usize,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    Hopf {
        n: usize,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default = "default_ansatz")]
        ansatz: HopfAnsatz,
    },
    CalabiEckmann {
        n: usize,
        m: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_amplitude() -> f64 {
    0.5
}
fn default_kahler_eps() -> f64 {
    0.05
}
fn default_pluriclosed_eps() -> f64 {
    0.3
}
fn default_samples() -> usize {
    20
}
fn two() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn default_ansatz() -> HopfAnsatz {
    HopfAnsatz::Homogeneous
}

#[allow(clippy::large_enum_variant)]
pub enum Model {
    Metric(MetricField),
    Toric(ToricBundleData),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::FlatTorus { .. } => "flat-torus",
            ModelSpec::ConformalTorus { .. } => "conformal-torus",
            ModelSpec::KahlerTorus { .. } => "kahler-torus",
            ModelSpec::PluriclosedTorus { .. } => "pluriclosed-torus",
            ModelSpec::FubiniStudy { .. } => "fubini-study",
            ModelSpec::Hopf { .. } => "hopf",
            ModelSpec::CalabiEckmann { .. } => "calabi-eckmann",
        }
    }

    /// Default counts: 32 points on x₁ where the models vary, 8 elsewhere (4 for n ≥ 3).
    pub fn default_counts(n: usize, fine_first: bool) -> Vec<usize> {
        let other = if n >= 3 { 4 } else { 8 };
        let mut c = vec![other; 2 * n];
        if fine_first {
            c[0] = 32;
        }
        c
    }

    pub fn build(&self, seed: u64) -> Result<Model> {
        Ok(match self {
            ModelSpec::FlatTorus { n, counts } => {
                let c = counts.clone().unwrap_or_else(|| vec![4; 2 * n]);
                Model::Metric(flat_torus(*n, &c, &vec![1.0; 2 * n])?)
            }
            ModelSpec::ConformalTorus {
                n,
                amplitude,
                counts,
            } => {
                // e^φ with |φ| = 0.5 needs 16 points per axis before the two Ricci paths agree to 1e-8
                let c = counts
                    .clone()
                    .unwrap_or_else(|| vec![if *n <= 2 { 16 } else { 8 }; 2 * n]);
                let grid = torus_grid(*n, &c)?;
                let phi = random_band_limited(&grid, 1, 6, *amplitude, seed)?;
                Model::Metric(conformal_torus(&grid, &phi)?)
            }
            ModelSpec::KahlerTorus {
                n,
                amplitude,
                counts,
            } => {
                let c = counts
                    .clone()
                    .unwrap_or_else(|| Self::default_counts(*n, true));
                let grid = torus_grid(*n, &c)?;
                let psi = FourierSeries::single_cos(vec![1.0; 2 * n], 0, 1);
                Model::Metric(kahler_perturbed_torus(&grid, &psi, *amplitude)?)
            }
            ModelSpec::PluriclosedTorus {
                n,
                amplitude,
                counts,
            } => {
                if *n != 2 {
                    return Err(GyError::Dimension(format!(
                        "the pluriclosed torus has n = 2, got {n}"
                    )));
                }
                let c = counts.clone().unwrap_or_else(|| vec![32, 4, 4, 4]);
                Model::Metric(pluriclosed_torus(&torus_grid(2, &c)?, *amplitude)?)
            }
            ModelSpec::FubiniStudy { n, samples, scale } => Model::Metric(fubini_study(
                *n,
                chart_samples(*n, *samples, 1.5, seed),
                *scale,
            )?),
            ModelSpec::Hopf {
                n,
                alpha,
                beta,
                ansatz,
            } => Model::Metric(hopf_metric(*n, *alpha, *beta, *ansatz, seed)?),
            ModelSpec::CalabiEckmann { n, m, samples } => {
                Model::Toric(calabi_eckmann_data(*n, *m, *samples, seed)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_ddbar_matches_spectral() {
        let grid = torus_grid(2, &[8, 8, 8, 8]).unwrap();
        let s = FourierSeries::random(vec![1.0; 4], 2, 5, 3);
        let f = s.sample(&grid);
        let num = crate::conformal::ddbar(&f).unwrap();
        for k in (0..grid.len()).step_by(97) {
            let a = s.ddbar(&grid.real_coords(k));
            for c in 0..4 {
                assert!((a[c] - num[c][k]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn kahler_amplitude_floor() {
        let grid = torus_grid(2, &[32, 4, 4, 4]).unwrap();
        let psi = FourierSeries::single_cos(vec![1.0; 4], 0, 1);
        assert!(kahler_perturbed_torus(&grid, &psi, 0.05).is_ok());
        assert!(matches!(
            kahler_perturbed_torus(&grid, &psi, 0.1),
            Err(GyError::Positivity(_))
        ));
    }

    #[test]
    fn samples_are_reproducible() {
        assert_eq!(annulus_samples(3, 7), annulus_samples(3, 7));
        assert_eq!(annulus_samples(2, 7).len(), 24);
        let s = chart_samples(2, 20, 1.5, 1);
        assert_eq!(s.len(), 20);
        assert!(s
            .iter()
            .all(|w| w.iter().map(|v| v.norm_sqr()).sum::<f64>() <= 2.25 + 1e-12));
    }

    #[test]
    fn model_spec_from_toml_like_json() {
        let spec: ModelSpec = serde_json::from_str(r#"{"kind":"hopf","n":3,"beta":-0.5}"#).unwrap();
        assert_eq!(
            spec,
            ModelSpec::Hopf {
                n: 3,
                alpha: 1.0,
                beta: -0.5,
                ansatz: HopfAnsatz::Homogeneous
            }
        );
    }
}
