//! Restarted GMRES with right preconditioning on real vectors.

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Relative residual target ‖b − Ax‖ / ‖b‖.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-10,
            restart: 40,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves A x = b starting from `x`, with right preconditioner M⁻¹ (A M⁻¹ y = b, x = M⁻¹ y).
pub fn gmres<A, M>(a: A, m: M, b: &[f64], x: &mut [f64], opts: GmresOptions) -> GmresOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut iterations = 0;
    let mut rel = f64::INFINITY;
    while iterations < opts.max_iter {
        let ax = a(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol {
            return GmresOutcome {
                iterations,
                relative_residual: rel,
                converged: true,
            };
        }
        let k_max = opts.restart.min(opts.max_iter - iterations);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        let mut h = vec![vec![0.0; k_max]; k_max + 1];
        let (mut cs, mut sn) = (vec![0.0; k_max], vec![0.0; k_max]);
        let mut g = vec![0.0; k_max + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..k_max {
            let zk = m(&v[k]);
            let mut w = a(&zk);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                w.iter_mut().zip(vi).for_each(|(w, v)| *w -= hik * v);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            cs[k] = if den == 0.0 { 1.0 } else { h[k][k] / den };
            sn[k] = if den == 0.0 { 0.0 } else { h[k + 1][k] / den };
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            iterations += 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= opts.tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] == 0.0 {
                0.0
            } else {
                (g[i] - s) / h[i][i]
            };
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(x, z)| *x += yi * z);
        }
        if rel <= opts.tol {
            let ax = a(x);
            let true_rel = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
            if true_rel <= 10.0 * opts.tol {
                return GmresOutcome {
                    iterations,
                    relative_residual: true_rel,
                    converged: true,
                };
            }
        }
    }
    GmresOutcome {
        iterations,
        relative_residual: rel,
        converged: rel <= opts.tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_tridiagonal() {
        let n = 50;
        let a = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    3.0 * x[i] - 1.3 * l - 0.4 * r
                })
                .collect()
        };
        let want: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a(&want);
        let mut x = vec![0.0; n];
        let out = gmres(
            a,
            |v: &[f64]| v.iter().map(|x| x / 3.0).collect(),
            &b,
            &mut x,
            GmresOptions {
                tol: 1e-12,
                restart: 10,
                max_iter: 500,
            },
        );
        assert!(out.converged);
        assert!(x.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}
