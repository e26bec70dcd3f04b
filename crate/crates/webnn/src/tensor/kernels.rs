//! Row-major matrix kernels shared by the batched product and its backward.
//!
//! All kernels accumulate into `out` (`out += ...`).

use super::Real;

const LANES: usize = 8;

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let s0 = (acc[0] + acc[4]) + (acc[1] + acc[5]);
    let s1 = (acc[2] + acc[6]) + (acc[3] + acc[7]);
    (s0 + s1) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[m,n] += a[m,k] · b[k,n]`
pub fn gemm_nn<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    if n == 1 {
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o += dot(&a[i * k..(i + 1) * k], b);
        }
        return;
    }
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for t in 0..k {
            axpy(a[i * k + t], &b[t * n..(t + 1) * n], row);
        }
    }
}

/// `out[m,n] += a[m,k] · b[n,k]ᵀ`
pub fn gemm_nt<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    if k == 1 {
        for i in 0..m {
            axpy(a[i], &b[..n], &mut out[i * n..(i + 1) * n]);
        }
        return;
    }
    for i in 0..m {
        let ra = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] += dot(ra, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `out[m,n] += a[k,m]ᵀ · b[k,n]`
pub fn gemm_tn<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    if n == 1 {
        for t in 0..k {
            axpy(b[t], &a[t * m..(t + 1) * m], &mut out[..m]);
        }
        return;
    }
    for t in 0..k {
        let rb = &b[t * n..(t + 1) * n];
        for i in 0..m {
            axpy(a[t * m + i], rb, &mut out[i * n..(i + 1) * n]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for t in 0..k {
                    out[i * n + j] += a[i * k + t] * b[t * n + j];
                }
            }
        }
        out
    }

    fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = x[r * cols + c];
            }
        }
        out
    }

    #[test]
    fn kernels_agree_with_triple_loop() {
        for &(m, k, n) in &[(1, 1, 1), (3, 5, 1), (4, 1, 3), (7, 9, 5), (2, 17, 3)] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
            let want = reference(&a, &b, m, k, n);

            let mut out = vec![0.0; m * n];
            gemm_nn(&a, &b, &mut out, m, k, n);
            assert!(out.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));

            let mut out = vec![0.0; m * n];
            gemm_nt(&a, &transpose(&b, k, n), &mut out, m, k, n);
            assert!(out.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));

            let mut out = vec![0.0; m * n];
            gemm_tn(&transpose(&a, m, k), &b, &mut out, m, k, n);
            assert!(out.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (1..=19).map(f64::from).collect();
        assert_eq!(dot(&a, &a), (1..=19).map(|i| (i * i) as f64).sum::<f64>());
    }
}
