//! Zero-padded "same" 2-D cross-correlation on single planes.
//!
//! These are the inner loops shared by the blur operators and the regularizer's
//! filter stacks. A plane is a row-major `h * w` slice; kernels are row-major
//! `k * k` with odd `k`.

/// `out += kernel ⋆ input` (cross-correlation, no flip).
#[inline]
pub fn correlate_acc(out: &mut [f64], input: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) {
    let r = (k / 2) as isize;
    for a in 0..k {
        let di = a as isize - r;
        let (i0, i1) = valid_range(h, di);
        for b in 0..k {
            let wk = kernel[a * k + b];
            if wk == 0.0 {
                continue;
            }
            let dj = b as isize - r;
            let (j0, j1) = valid_range(w, dj);
            if j0 >= j1 {
                continue;
            }
            for i in i0..i1 {
                let src_row = (i as isize + di) as usize * w;
                let src = &input[(src_row as isize + j0 as isize + dj) as usize..][..j1 - j0];
                let dst = &mut out[i * w + j0..i * w + j1];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wk * s;
                }
            }
        }
    }
}

/// `out += adjoint(kernel ⋆ ·)(input)`, the exact transpose of [`correlate_acc`].
#[inline]
pub fn correlate_adjoint_acc(
    out: &mut [f64],
    input: &[f64],
    h: usize,
    w: usize,
    kernel: &[f64],
    k: usize,
) {
    let r = (k / 2) as isize;
    for a in 0..k {
        let di = a as isize - r;
        let (i0, i1) = valid_range(h, di);
        for b in 0..k {
            let wk = kernel[a * k + b];
            if wk == 0.0 {
                continue;
            }
            let dj = b as isize - r;
            let (j0, j1) = valid_range(w, dj);
            if j0 >= j1 {
                continue;
            }
            for i in i0..i1 {
                let dst_row = (i as isize + di) as usize * w;
                let dst = &mut out[(dst_row as isize + j0 as isize + dj) as usize..][..j1 - j0];
                let src = &input[i * w + j0..i * w + j1];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wk * s;
                }
            }
        }
    }
}

/// Output indices `i` in `0..n` for which `i + shift` is also in `0..n`.
#[inline]
fn valid_range(n: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (n as isize - shift.max(0)).max(0) as usize;
    (lo.min(n), hi.min(n).max(lo.min(n)))
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Runs `f` with a reusable per-thread buffer of `len` elements whose contents
/// are unspecified on entry.
pub fn with_scratch<T>(len: usize, f: impl FnOnce(&mut [f64]) -> T) -> T {
    SCRATCH.with(|cell| match cell.try_borrow_mut() {
        Ok(mut buf) => {
            if buf.len() < len {
                buf.resize(len, 0.0);
            }
            f(&mut buf[..len])
        }
        // nested use falls back to a fresh allocation
        Err(_) => f(&mut vec![0.0; len]),
    })
}

/// Patch matrix of a multi-channel stack: row `c·k² + a·k + b` holds the
/// plane `c` shifted by `(a − r, b − r)`, zero outside. Every entry of
/// `cols` (length `c·k²·h·w`) is written.
pub fn im2col_into(input: &[f64], c: usize, h: usize, w: usize, k: usize, cols: &mut [f64]) {
    let hw = h * w;
    let r = (k / 2) as isize;
    debug_assert_eq!(cols.len(), c * k * k * hw);
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for a in 0..k {
            let di = a as isize - r;
            let (i0, i1) = valid_range(h, di);
            for b in 0..k {
                let dj = b as isize - r;
                let (j0, j1) = valid_range(w, dj);
                let row = &mut cols[((ch * k + a) * k + b) * hw..][..hw];
                if j0 >= j1 || i0 >= i1 {
                    row.fill(0.0);
                    continue;
                }
                row[..i0 * w].fill(0.0);
                row[i1 * w..].fill(0.0);
                for i in i0..i1 {
                    let line = &mut row[i * w..(i + 1) * w];
                    line[..j0].fill(0.0);
                    line[j1..].fill(0.0);
                    let src = ((i as isize + di) as usize * w) as isize + dj;
                    line[j0..j1].copy_from_slice(&plane[(src + j0 as isize) as usize..][..j1 - j0]);
                }
            }
        }
    }
}

#[cfg(test)]
pub fn im2col(input: &[f64], c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let mut cols = vec![0.0; c * k * k * h * w];
    im2col_into(input, c, h, w, k, &mut cols);
    cols
}

/// Transpose of [`im2col`], accumulated into `out`.
pub fn col2im_acc(cols: &[f64], out: &mut [f64], c: usize, h: usize, w: usize, k: usize) {
    let hw = h * w;
    let r = (k / 2) as isize;
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for a in 0..k {
            let di = a as isize - r;
            let (i0, i1) = valid_range(h, di);
            for b in 0..k {
                let dj = b as isize - r;
                let (j0, j1) = valid_range(w, dj);
                if j0 >= j1 {
                    continue;
                }
                let row = &cols[((ch * k + a) * k + b) * hw..][..hw];
                for i in i0..i1 {
                    let dst = ((i as isize + di) as usize * w) as isize + dj;
                    let dst = &mut plane[(dst + j0 as isize) as usize..][..j1 - j0];
                    for (d, s) in dst.iter_mut().zip(&row[i * w + j0..i * w + j1]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// `C ← A·B + beta·C` for row-major `A (m×n)`, `B (n×p)`, `C (m×p)`;
/// `trans_a` reads `A` as its transpose stored `n×m`, `trans_b` reads `B`
/// as its transpose stored `p×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    n: usize,
    p: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * n && b.len() >= n * p && c.len() >= m * p);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (n as isize, 1) };
    let (rsb, csb) = if trans_b { (1, n as isize) } else { (p as isize, 1) };
    // SAFETY: the strides above address exactly the checked slice extents.
    unsafe {
        matrixmultiply::dgemm(
            m,
            n,
            p,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            p as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(input: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Vec<f64> {
        let r = (k / 2) as isize;
        let mut out = vec![0.0; h * w];
        for i in 0..h as isize {
            for j in 0..w as isize {
                let mut s = 0.0;
                for a in 0..k as isize {
                    for b in 0..k as isize {
                        let (y, x) = (i + a - r, j + b - r);
                        if y >= 0 && y < h as isize && x >= 0 && x < w as isize {
                            s += kernel[(a * k as isize + b) as usize]
                                * input[(y * w as isize + x) as usize];
                        }
                    }
                }
                out[(i * w as isize + j) as usize] = s;
            }
        }
        out
    }

    #[test]
    fn matches_naive_loop() {
        let (h, w, k) = (5, 7, 3);
        let input: Vec<f64> = (0..h * w).map(|v| (v as f64 * 0.37).sin()).collect();
        let kernel: Vec<f64> = (0..k * k).map(|v| (v as f64 * 1.3).cos()).collect();
        let mut out = vec![0.0; h * w];
        correlate_acc(&mut out, &input, h, w, &kernel, k);
        let want = naive(&input, h, w, &kernel, k);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn kernel_larger_than_plane() {
        let (h, w, k) = (2, 3, 7);
        let input: Vec<f64> = (0..h * w).map(|v| v as f64 + 1.0).collect();
        let kernel: Vec<f64> = (0..k * k).map(|v| v as f64 * 0.1).collect();
        let mut out = vec![0.0; h * w];
        correlate_acc(&mut out, &input, h, w, &kernel, k);
        let want = naive(&input, h, w, &kernel, k);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn im2col_gemm_matches_correlation() {
        let (c, o, h, w, k) = (2, 3, 5, 6, 3);
        let input: Vec<f64> = (0..c * h * w).map(|v| (v as f64 * 0.21).sin()).collect();
        let weights: Vec<f64> = (0..o * c * k * k).map(|v| (v as f64 * 0.7).cos()).collect();
        let cols = im2col(&input, c, h, w, k);
        let mut out = vec![0.0; o * h * w];
        gemm(o, c * k * k, h * w, &weights, false, &cols, false, 0.0, &mut out);
        for oo in 0..o {
            let mut want = vec![0.0; h * w];
            for cc in 0..c {
                let kern = &weights[(oo * c + cc) * k * k..][..k * k];
                correlate_acc(&mut want, &input[cc * h * w..][..h * w], h, w, kern, k);
            }
            for (a, b) in out[oo * h * w..][..h * w].iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn col2im_is_transpose_of_im2col() {
        let (c, h, w, k) = (2, 4, 3, 5);
        let x: Vec<f64> = (0..c * h * w).map(|v| (v as f64 * 1.1).sin()).collect();
        let y: Vec<f64> = (0..c * k * k * h * w).map(|v| (v as f64 * 0.3).cos()).collect();
        let lhs: f64 = im2col(&x, c, h, w, k).iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; c * h * w];
        col2im_acc(&y, &mut back, c, h, w, k);
        let rhs: f64 = back.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn gemm_transposes() {
        // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(2, 2, 2, &a, true, &b, false, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(2, 2, 2, &a, false, &b, true, 0.0, &mut c);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }
}
