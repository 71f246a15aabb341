//! Flat-slice linear algebra used by the layers. All loops are ordered so the
//! innermost one walks contiguous memory.

use crate::scalar::Scalar;

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = T::zero();
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `c[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_acc<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            axpy(av, &b[p * n..(p + 1) * n], c_row);
        }
    }
}

/// Unfolds one `[c][h][w]` image into `[c·k·k][oh·ow]` patch columns (valid padding, stride 1).
pub(crate) fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, cols: &mut [T]) {
    let oh = h - k + 1;
    let ow = w - k + 1;
    let p = oh * ow;
    debug_assert_eq!(cols.len(), c * k * k * p);
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let q = (ch * k + ky) * k + kx;
                let dst = &mut cols[q * p..(q + 1) * p];
                for oy in 0..oh {
                    let src = &x[ch * h * w + (oy + ky) * w + kx..][..ow];
                    dst[oy * ow..(oy + 1) * ow].copy_from_slice(src);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch-column gradients back onto the image.
pub(crate) fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, k: usize, dx: &mut [T]) {
    let oh = h - k + 1;
    let ow = w - k + 1;
    let p = oh * ow;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let q = (ch * k + ky) * k + kx;
                let src = &cols[q * p..(q + 1) * p];
                for oy in 0..oh {
                    let dst = &mut dx[ch * h * w + (oy + ky) * w + kx..][..ow];
                    for (d, &s) in dst.iter_mut().zip(&src[oy * ow..(oy + 1) * ow]) {
                        *d += s;
                    }
                }
            }
        }
    }
}
