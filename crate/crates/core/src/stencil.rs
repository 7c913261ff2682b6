//! Fourth-order centred differences for quantities given as functions of the chart point.

use num_complex::Complex64 as C64;

/// Partial derivatives along the 2n real axes of a vector-valued function.
pub fn real_partials<F>(f: &F, z: &[C64], h: f64) -> Vec<Vec<C64>>
where
    F: Fn(&[C64]) -> Vec<C64> + ?Sized,
{
    let n = z.len();
    let mut out = Vec::with_capacity(2 * n);
    let mut w = z.to_vec();
    for a in 0..2 * n {
        let i = a / 2;
        let dir = if a % 2 == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 1.0)
        };
        let mut eval = |s: f64| {
            w[i] = z[i] + dir * (s * h);
            let v = f(&w);
            w[i] = z[i];
            v
        };
        let p1 = eval(1.0);
        let m1 = eval(-1.0);
        let p2 = eval(2.0);
        let m2 = eval(-2.0);
        let scale = 1.0 / (12.0 * h);
        out.push(
            (0..p1.len())
                .map(|k| (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) * scale)
                .collect(),
        );
    }
    out
}

/// Holomorphic and antiholomorphic derivatives: `(d[i], dbar[i])` for each coordinate z_i.
pub fn complex_partials<F>(f: &F, z: &[C64], h: f64) -> (Vec<Vec<C64>>, Vec<Vec<C64>>)
where
    F: Fn(&[C64]) -> Vec<C64> + ?Sized,
{
    let r = real_partials(f, z, h);
    let half_i = C64::new(0.0, 0.5);
    let n = z.len();
    let mut d = Vec::with_capacity(n);
    let mut db = Vec::with_capacity(n);
    for i in 0..n {
        let (dx, dy) = (&r[2 * i], &r[2 * i + 1]);
        d.push(
            dx.iter()
                .zip(dy)
                .map(|(a, b)| 0.5 * a - half_i * b)
                .collect(),
        );
        db.push(
            dx.iter()
                .zip(dy)
                .map(|(a, b)| 0.5 * a + half_i * b)
                .collect(),
        );
    }
    (d, db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holomorphic_polynomial() {
        let f = |z: &[C64]| vec![z[0] * z[0] * z[1], z[1].conj()];
        let z = [C64::new(0.3, -0.7), C64::new(1.1, 0.4)];
        let (d, db) = complex_partials(&f, &z, 1e-3);
        assert!((d[0][0] - 2.0 * z[0] * z[1]).norm() < 1e-11);
        assert!((d[1][0] - z[0] * z[0]).norm() < 1e-11);
        assert!(db[0][0].norm() < 1e-11 && db[1][0].norm() < 1e-11);
        assert!(d[1][1].norm() < 1e-11);
        assert!((db[1][1] - 1.0).norm() < 1e-11);
    }
}
