//! Small dense complex matrices stored row-major in flat slices.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Inverse and determinant by Gauss–Jordan elimination with partial pivoting.
pub fn invert(a: &[C64], n: usize) -> Option<(Vec<C64>, C64)> {
    let mut m = a.to_vec();
    let mut inv = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        inv[i * n + i] = C64::new(1.0, 0.0);
    }
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let piv =
            (col..n).max_by(|&r, &s| m[r * n + col].norm().total_cmp(&m[s * n + col].norm()))?;
        if m[piv * n + col].norm() == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        let pinv = p.inv();
        for k in 0..n {
            m[col * n + k] *= pinv;
            inv[col * n + k] *= pinv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f.norm() == 0.0 {
                continue;
            }
            for k in 0..n {
                let (mc, ic) = (m[col * n + k], inv[col * n + k]);
                m[r * n + k] -= f * mc;
                inv[r * n + k] -= f * ic;
            }
        }
    }
    Some((inv, det))
}

pub fn matmul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j];
        }
    }
    out
}

/// Largest entry of `a - a^H` in modulus.
pub fn hermitian_defect(a: &[C64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[i * n + j] - a[j * n + i].conj()).norm());
        }
    }
    worst
}

/// Replaces `a` by its Hermitian part.
pub fn hermitize(a: &mut [C64], n: usize) {
    for i in 0..n {
        a[i * n + i] = C64::new(a[i * n + i].re, 0.0);
        for j in i + 1..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i].conj());
            a[i * n + j] = v;
            a[j * n + i] = v.conj();
        }
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &[C64], n: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(n, n, a);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inverse_of_diagonal() {
        let a = [c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)];
        let (inv, det) = invert(&a, 2).unwrap();
        assert!((inv[0] - 0.5).norm() < 1e-15 && (inv[3] - 1.0 / 3.0).norm() < 1e-15);
        assert!((det - 6.0).norm() < 1e-14);
    }

    #[test]
    fn inverse_of_hermitian_with_pivoting() {
        let a = [c(1e-3, 0.0), c(1.0, 2.0), c(1.0, -2.0), c(7.0, 0.0)];
        let (inv, det) = invert(&a, 2).unwrap();
        let prod = matmul(&a, &inv, 2);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * 2 + j] - e).norm() < 1e-13);
            }
        }
        assert!((det - (7e-3 - 5.0)).norm() < 1e-13);
        assert!(invert(&[c(0.0, 0.0); 4], 2).is_none());
    }

    #[test]
    fn eigenvalues_of_hermitian() {
        let a = [c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
        let ev = hermitian_eigenvalues(&a, 2);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        assert!(hermitian_defect(&a, 2) < 1e-15);
    }
}
