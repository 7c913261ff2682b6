//! FFT differentiation on periodic grids.
//!
//! First-derivative symbols vanish on the Nyquist wavenumber so that derivatives of real
//! fields stay real. Modes with a Nyquist index on any axis are called unresolved; the
//! elliptic solvers work in the complement of those modes.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

pub struct Spectral {
    counts: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    sym_dz: Vec<Vec<C64>>,
    sym_dzbar: Vec<Vec<C64>>,
    resolved: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("counts", &self.counts)
            .finish()
    }
}

fn wavenumbers(count: usize, period: f64) -> (Vec<f64>, Vec<bool>) {
    let mut k = vec![0.0; count];
    let mut nyq = vec![false; count];
    for (m, (km, nm)) in k.iter_mut().zip(nyq.iter_mut()).enumerate() {
        if 2 * m == count {
            *nm = true;
        } else {
            let signed = if 2 * m < count {
                m as f64
            } else {
                m as f64 - count as f64
            };
            *km = 2.0 * std::f64::consts::PI * signed / period;
        }
    }
    (k, nyq)
}

impl Spectral {
    pub(crate) fn new(n: usize, counts: &[usize], periods: &[f64]) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let fwd = counts
            .iter()
            .map(|&c| planner.plan_fft_forward(c))
            .collect();
        let inv = counts
            .iter()
            .map(|&c| planner.plan_fft_inverse(c))
            .collect();
        let len: usize = counts.iter().product();
        let mut strides = vec![1; counts.len()];
        for a in (0..counts.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        let axes: Vec<(Vec<f64>, Vec<bool>)> = counts
            .iter()
            .zip(periods)
            .map(|(&c, &p)| wavenumbers(c, p))
            .collect();
        let mut sym_dz = vec![vec![C64::new(0.0, 0.0); len]; n];
        let mut sym_dzbar = vec![vec![C64::new(0.0, 0.0); len]; n];
        let mut resolved = vec![true; len];
        let mut idx = vec![0usize; counts.len()];
        for mode in 0..len {
            for i in 0..n {
                let kx = axes[2 * i].0[idx[2 * i]];
                let ky = axes[2 * i + 1].0[idx[2 * i + 1]];
                sym_dz[i][mode] = C64::new(0.5 * ky, 0.5 * kx);
                sym_dzbar[i][mode] = C64::new(-0.5 * ky, 0.5 * kx);
            }
            resolved[mode] = idx.iter().enumerate().all(|(a, &m)| !axes[a].1[m]);
            for a in (0..counts.len()).rev() {
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Spectral {
            counts: counts.to_vec(),
            strides,
            len,
            fwd,
            inv,
            sym_dz,
            sym_dzbar,
            resolved,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn transform(&self, data: &mut [C64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let mut line = Vec::new();
        for (a, plan) in plans.iter().enumerate() {
            let count = self.counts[a];
            let stride = self.strides[a];
            if stride == 1 {
                plan.process(data);
                continue;
            }
            line.resize(count, C64::new(0.0, 0.0));
            let block = count * stride;
            for base in (0..self.len).step_by(block) {
                for r in 0..stride {
                    let start = base + r;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[start + k * stride];
                    }
                    plan.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        data[start + k * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, f: &[C64]) -> Vec<C64> {
        let mut out = f.to_vec();
        self.transform(&mut out, false);
        out
    }

    pub fn forward_real(&self, f: &[f64]) -> Vec<C64> {
        let mut out: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.transform(&mut out, false);
        out
    }

    /// Normalised inverse transform.
    pub fn inverse(&self, mut fh: Vec<C64>) -> Vec<C64> {
        self.transform(&mut fh, true);
        let s = 1.0 / self.len as f64;
        for v in fh.iter_mut() {
            *v *= s;
        }
        fh
    }

    pub fn symbol_dz(&self, i: usize) -> &[C64] {
        &self.sym_dz[i]
    }

    pub fn symbol_dzbar(&self, i: usize) -> &[C64] {
        &self.sym_dzbar[i]
    }

    pub fn resolved(&self) -> &[bool] {
        &self.resolved
    }

    /// Inverse transform of `fh` multiplied by `sym`.
    pub fn apply(&self, fh: &[C64], sym: &[C64]) -> Vec<C64> {
        self.inverse(fh.iter().zip(sym).map(|(a, b)| a * b).collect())
    }

    /// Inverse transform of `fh` multiplied by the product of two symbols.
    pub fn apply2(&self, fh: &[C64], s1: &[C64], s2: &[C64]) -> Vec<C64> {
        self.inverse(
            fh.iter()
                .zip(s1)
                .zip(s2)
                .map(|((a, b), c)| a * b * c)
                .collect(),
        )
    }

    pub fn dz(&self, f: &[C64], i: usize) -> Vec<C64> {
        self.apply(&self.forward(f), &self.sym_dz[i])
    }

    pub fn dzbar(&self, f: &[C64], i: usize) -> Vec<C64> {
        self.apply(&self.forward(f), &self.sym_dzbar[i])
    }

    /// All holomorphic and antiholomorphic first derivatives of one field.
    pub fn gradients(&self, f: &[C64]) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
        let fh = self.forward(f);
        let n = self.sym_dz.len();
        let d = (0..n).map(|i| self.apply(&fh, &self.sym_dz[i])).collect();
        let db = (0..n)
            .map(|i| self.apply(&fh, &self.sym_dzbar[i]))
            .collect();
        (d, db)
    }

    /// Removes the constant mode and all unresolved modes from a real field.
    pub fn project_resolved(&self, f: &[f64]) -> Vec<f64> {
        self.filter(f, true)
    }

    /// Removes the unresolved modes, keeping the mean.
    pub fn drop_unresolved(&self, f: &[f64]) -> Vec<f64> {
        self.filter(f, false)
    }

    fn filter(&self, f: &[f64], drop_mean: bool) -> Vec<f64> {
        let mut fh = self.forward_real(f);
        if drop_mean {
            fh[0] = C64::new(0.0, 0.0);
        }
        for (v, &r) in fh.iter_mut().zip(&self.resolved) {
            if !r {
                *v = C64::new(0.0, 0.0);
            }
        }
        self.inverse(fh).into_iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid_points(counts: &[usize], periods: &[f64]) -> Vec<Vec<f64>> {
        let len: usize = counts.iter().product();
        (0..len)
            .map(|node| {
                let mut rest = node;
                let mut x = vec![0.0; counts.len()];
                for a in (0..counts.len()).rev() {
                    x[a] = (rest % counts[a]) as f64 * periods[a] / counts[a] as f64;
                    rest /= counts[a];
                }
                x
            })
            .collect()
    }

    #[test]
    fn derivative_of_sine_along_x() {
        let sp = Spectral::new(1, &[8, 8], &[1.0, 1.0]);
        let pts = grid_points(&[8, 8], &[1.0, 1.0]);
        let f: Vec<C64> = pts
            .iter()
            .map(|x| C64::new((2.0 * PI * x[0]).sin(), 0.0))
            .collect();
        let d = sp.dz(&f, 0);
        for (x, v) in pts.iter().zip(&d) {
            assert!((v - C64::new(PI * (2.0 * PI * x[0]).cos(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let sp = Spectral::new(2, &[4, 6, 4, 8], &[1.0, 2.0, 1.0, 0.5]);
        let f = vec![C64::new(3.5, -1.0); sp.len()];
        for i in 0..2 {
            assert!(sp.dz(&f, i).iter().all(|v| v.norm() < 1e-13));
            assert!(sp.dzbar(&f, i).iter().all(|v| v.norm() < 1e-13));
        }
    }

    #[test]
    fn mixed_exponential_against_analytic_derivative() {
        // f = exp(2 pi i x_1) exp(2 pi i y_2); d/dz_1 = pi i f, d/dz_2 = -i/2 * 2 pi i f = pi f
        let counts = [8, 8, 8, 8];
        let sp = Spectral::new(2, &counts, &[1.0; 4]);
        let pts = grid_points(&counts, &[1.0; 4]);
        let f: Vec<C64> = pts
            .iter()
            .map(|x| C64::from_polar(1.0, 2.0 * PI * (x[0] + x[3])))
            .collect();
        let d1 = sp.dz(&f, 0);
        let d2 = sp.dz(&f, 1);
        let db2 = sp.dzbar(&f, 1);
        for k in 0..f.len() {
            assert!((d1[k] - C64::new(0.0, PI) * f[k]).norm() < 1e-12);
            assert!((d2[k] - PI * f[k]).norm() < 1e-12);
            assert!((db2[k] + PI * f[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugation_swaps_dz_and_dzbar() {
        let counts = [8, 6];
        let sp = Spectral::new(1, &counts, &[1.0, 1.0]);
        let pts = grid_points(&counts, &[1.0, 1.0]);
        let f: Vec<C64> = pts
            .iter()
            .map(|x| {
                C64::new(
                    (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin(),
                    (2.0 * PI * x[1]).cos(),
                )
            })
            .collect();
        let conj: Vec<C64> = f.iter().map(|v| v.conj()).collect();
        let lhs: Vec<C64> = sp.dz(&conj, 0).iter().map(|v| v.conj()).collect();
        let rhs = sp.dzbar(&f, 0);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_kills_constants_and_nyquist() {
        let counts = [4, 4];
        let sp = Spectral::new(1, &counts, &[1.0, 1.0]);
        let pts = grid_points(&counts, &[1.0, 1.0]);
        let f: Vec<f64> = pts
            .iter()
            .map(|x| 2.0 + (2.0 * PI * x[0]).sin() + (4.0 * PI * x[1]).cos())
            .collect();
        let p = sp.project_resolved(&f);
        for (x, v) in pts.iter().zip(&p) {
            assert!((v - (2.0 * PI * x[0]).sin()).abs() < 1e-12);
        }
    }
}
