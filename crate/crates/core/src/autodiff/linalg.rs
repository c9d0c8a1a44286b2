//! Dense f64 kernels behind the autodiff operators.
//!
//! Everything funnels into one strided GEMM driver:
//! `C[r][j] (+)= sum_t A(t, r) * B[t][j]`, where A is addressed as
//! `a_off + t*a_tstride + r*a_rstride`. With `(a_tstride, a_rstride) =
//! (1, lda)` this is plain row-major `A*B`; with `(lda, 1)` it computes
//! `A^T*B` without materializing the transpose. 3x3 same-padding convolution
//! is expressed as per-row GEMMs over a zero-padded buffer (three
//! contiguous-k calls per output row, one per kernel row), so no im2col
//! buffer exists.
//!
//! An AVX-512 micro-kernel (8 rows x 16 columns of C, FMA) is selected at
//! runtime; otherwise a portable scalar kernel with identical blocking runs.
//! Within one build and machine the summation order is fixed, so results are
//! bit-deterministic.

/// Contraction block size. Accumulator registers persist across one block;
/// longer contractions accumulate through C in multiple passes.
const KC: usize = 4096;
/// Row block size: panels of A this tall stay cache-resident across the
/// column tiles of one pass.
const MC: usize = 256;

#[cfg(target_arch = "x86_64")]
fn avx512_available() -> bool {
    use std::sync::OnceLock;
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| std::is_x86_feature_detected!("avx512f"))
}

#[cfg(not(target_arch = "x86_64"))]
fn avx512_available() -> bool {
    false
}

/// Strided GEMM driver; see module docs for the addressing convention.
/// `accumulate = false` overwrites C, `relu` clamps negatives in the final
/// pass epilogue.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_strided(
    a: &[f64],
    a_off: usize,
    a_tstride: usize,
    a_rstride: usize,
    b: &[f64],
    b_off: usize,
    ldb: usize,
    c: &mut [f64],
    c_off: usize,
    ldc: usize,
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
    relu: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            for r in 0..m {
                c[c_off + r * ldc..c_off + r * ldc + n].fill(0.0);
            }
        }
        return;
    }
    // One bounds check for the whole call; the kernels use raw pointers.
    let a_max = a_off + (k - 1) * a_tstride + (m - 1) * a_rstride;
    let b_max = b_off + (k - 1) * ldb + (n - 1);
    let c_max = c_off + (m - 1) * ldc + (n - 1);
    assert!(a_max < a.len(), "A view out of bounds");
    assert!(b_max < b.len(), "B view out of bounds");
    assert!(c_max < c.len(), "C view out of bounds");

    let use_avx512 = avx512_available();
    let kblocks = k.div_ceil(KC);
    for bi in 0..kblocks {
        let k0 = bi * KC;
        let kb = KC.min(k - k0);
        let acc_block = accumulate || bi > 0;
        let relu_block = relu && bi == kblocks - 1;
        for i0 in (0..m).step_by(MC) {
            let mchunk = MC.min(m - i0);
            for j0 in (0..n).step_by(16) {
                let cols = 16.min(n - j0);
                for p0 in (0..mchunk).step_by(8) {
                    let rows = 8.min(mchunk - p0);
                    let row = i0 + p0;
                    let a_o = a_off + k0 * a_tstride + row * a_rstride;
                    let b_o = b_off + k0 * ldb + j0;
                    let c_o = c_off + row * ldc + j0;
                    unsafe {
                        dispatch_kernel(
                            use_avx512,
                            rows,
                            a.as_ptr().add(a_o),
                            a_tstride,
                            a_rstride,
                            b.as_ptr().add(b_o),
                            ldb,
                            c.as_mut_ptr().add(c_o),
                            ldc,
                            kb,
                            cols,
                            acc_block,
                            relu_block,
                        );
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
unsafe fn dispatch_kernel(
    use_avx512: bool,
    rows: usize,
    a: *const f64,
    a_tstride: usize,
    a_rstride: usize,
    b: *const f64,
    ldb: usize,
    c: *mut f64,
    ldc: usize,
    k: usize,
    cols: usize,
    accumulate: bool,
    relu: bool,
) {
    macro_rules! go {
        ($mk:ident) => {
            match rows {
                1 => $mk::<1>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                2 => $mk::<2>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                3 => $mk::<3>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                4 => $mk::<4>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                5 => $mk::<5>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                6 => $mk::<6>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                7 => $mk::<7>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                8 => $mk::<8>(a, a_tstride, a_rstride, b, ldb, c, ldc, k, cols, accumulate, relu),
                _ => unreachable!("rows capped at 8"),
            }
        };
    }
    #[cfg(target_arch = "x86_64")]
    if use_avx512 {
        use self::avx512::microkernel;
        go!(microkernel);
        return;
    }
    let _ = use_avx512;
    go!(microkernel_scalar);
}

/// Portable micro-kernel, same blocking and summation order as the SIMD one.
#[allow(clippy::too_many_arguments)]
unsafe fn microkernel_scalar<const R: usize>(
    a: *const f64,
    a_tstride: usize,
    a_rstride: usize,
    b: *const f64,
    ldb: usize,
    c: *mut f64,
    ldc: usize,
    k: usize,
    cols: usize,
    accumulate: bool,
    relu: bool,
) {
    let mut acc = [[0.0f64; 16]; R];
    for t in 0..k {
        let bp = b.add(t * ldb);
        let ap = a.add(t * a_tstride);
        for r in 0..R {
            let av = *ap.add(r * a_rstride);
            for j in 0..cols {
                acc[r][j] += av * *bp.add(j);
            }
        }
    }
    for (r, acc_row) in acc.iter().enumerate() {
        let cp = c.add(r * ldc);
        for (j, &v) in acc_row.iter().take(cols).enumerate() {
            let mut out = v;
            if accumulate {
                out += *cp.add(j);
            }
            if relu && out < 0.0 {
                out = 0.0;
            }
            *cp.add(j) = out;
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod avx512 {
    use std::arch::x86_64::*;

    /// 8x16 register-tiled FMA kernel: two zmm accumulator banks per C row,
    /// scalar broadcasts from A, streaming loads from B.
    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn microkernel<const R: usize>(
        a: *const f64,
        a_tstride: usize,
        a_rstride: usize,
        b: *const f64,
        ldb: usize,
        c: *mut f64,
        ldc: usize,
        k: usize,
        cols: usize,
        accumulate: bool,
        relu: bool,
    ) {
        let lo_mask: __mmask8 = if cols >= 8 { 0xFF } else { (1u8 << cols) - 1 };
        let hi = cols.saturating_sub(8);
        let hi_mask: __mmask8 = if hi >= 8 { 0xFF } else { (1u8 << hi).wrapping_sub(1) };
        let use_hi = cols > 8;

        let mut acc0 = [_mm512_setzero_pd(); R];
        let mut acc1 = [_mm512_setzero_pd(); R];
        for t in 0..k {
            let bp = b.add(t * ldb);
            let b0 = _mm512_maskz_loadu_pd(lo_mask, bp);
            let b1 = if use_hi {
                _mm512_maskz_loadu_pd(hi_mask, bp.add(8))
            } else {
                _mm512_setzero_pd()
            };
            let ap = a.add(t * a_tstride);
            for r in 0..R {
                let av = _mm512_set1_pd(*ap.add(r * a_rstride));
                acc0[r] = _mm512_fmadd_pd(av, b0, acc0[r]);
                if use_hi {
                    acc1[r] = _mm512_fmadd_pd(av, b1, acc1[r]);
                }
            }
        }
        let zero = _mm512_setzero_pd();
        for r in 0..R {
            let cp = c.add(r * ldc);
            let mut v0 = acc0[r];
            if accumulate {
                v0 = _mm512_add_pd(v0, _mm512_maskz_loadu_pd(lo_mask, cp));
            }
            if relu {
                v0 = _mm512_max_pd(v0, zero);
            }
            _mm512_mask_storeu_pd(cp, lo_mask, v0);
            if use_hi {
                let mut v1 = acc1[r];
                if accumulate {
                    v1 = _mm512_add_pd(v1, _mm512_maskz_loadu_pd(hi_mask, cp.add(8)));
                }
                if relu {
                    v1 = _mm512_max_pd(v1, zero);
                }
                _mm512_mask_storeu_pd(cp.add(8), hi_mask, v1);
            }
        }
    }
}

/// `x[m,k] * w[k,n] (+ bias) (-> relu)`, the dense-layer forward.
pub(crate) fn matmul_bias_act(
    x: &[f64],
    w: &[f64],
    bias: Option<&[f64]>,
    m: usize,
    k: usize,
    n: usize,
    relu: bool,
) -> Vec<f64> {
    let mut c = vec![0.0f64; m * n];
    let accumulate = match bias {
        Some(bias) => {
            debug_assert_eq!(bias.len(), n);
            for row in c.chunks_exact_mut(n) {
                row.copy_from_slice(bias);
            }
            true
        }
        None => false,
    };
    gemm_strided(x, 0, 1, k, w, 0, n, &mut c, 0, n, m, k, n, accumulate, relu);
    c
}

/// `a^T[k_rows=ka] * b`: contraction over the shared leading dimension m.
/// Shapes: a is `[m, ka]`, b is `[m, n]`, result `[ka, n]`.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], m: usize, ka: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0f64; ka * n];
    gemm_strided(a, 0, ka, 1, b, 0, n, &mut c, 0, n, ka, m, n, false, false);
    c
}

/// `a[m,k] * b^T` with b stored `[n, k]`. Used for dense-layer input grads.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    if m <= 16 && n >= 4 * m {
        // Skinny case (dX of a wide layer, batch-sized m): computing the
        // transposed product W * a^T avoids materializing b^T, which can be
        // hundreds of MB for the flatten layer.
        let at = transpose(a, m, k);
        let mut ct = vec![0.0f64; n * m];
        gemm_strided(b, 0, 1, k, &at, 0, m, &mut ct, 0, m, n, k, m, false, false);
        transpose(&ct, n, m)
    } else {
        let bt = transpose(b, n, k);
        let mut c = vec![0.0f64; m * n];
        gemm_strided(a, 0, 1, k, &bt, 0, n, &mut c, 0, n, m, k, n, false, false);
        c
    }
}

/// Row-major transpose `[rows, cols] -> [cols, rows]`.
pub(crate) fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(src.len(), rows * cols);
    let mut out = vec![0.0f64; src.len()];
    // Tile to keep both access streams cache-friendly.
    const T: usize = 32;
    for r0 in (0..rows).step_by(T) {
        for c0 in (0..cols).step_by(T) {
            for r in r0..(r0 + T).min(rows) {
                for c in c0..(c0 + T).min(cols) {
                    out[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    out
}

/// Dimensions of one conv2d application (stride 1, zero padding 1, 3x3).
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvShape {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub cout: usize,
}

impl ConvShape {
    fn padded_len(&self) -> usize {
        (self.h + 2) * (self.w + 2) * self.cin
    }
    fn image_len(&self) -> usize {
        self.h * self.w * self.cin
    }
    fn out_len(&self) -> usize {
        self.h * self.w * self.cout
    }
}

fn pad_image(x: &[f64], s: &ConvShape, out: &mut [f64]) {
    debug_assert_eq!(out.len(), s.padded_len());
    out.fill(0.0);
    let wp = s.w + 2;
    for y in 0..s.h {
        let src = &x[y * s.w * s.cin..(y + 1) * s.w * s.cin];
        let dst_off = ((y + 1) * wp + 1) * s.cin;
        out[dst_off..dst_off + s.w * s.cin].copy_from_slice(src);
    }
}

/// Forward 3x3 same conv as cross-correlation, optional fused ReLU.
/// `x: [batch, h, w, cin]`, `kernel: [3, 3, cin, cout]`, `bias: [cout]`.
pub(crate) fn conv2d_forward(
    x: &[f64],
    kernel: &[f64],
    bias: &[f64],
    s: &ConvShape,
    relu: bool,
) -> Vec<f64> {
    let mut out = vec![0.0f64; s.batch * s.out_len()];
    let mut padded = vec![0.0f64; s.padded_len()];
    let wp = s.w + 2;
    for img in 0..s.batch {
        pad_image(&x[img * s.image_len()..(img + 1) * s.image_len()], s, &mut padded);
        let out_img = &mut out[img * s.out_len()..(img + 1) * s.out_len()];
        for y in 0..s.h {
            let c_off = y * s.w * s.cout;
            for row in out_img[c_off..c_off + s.w * s.cout].chunks_exact_mut(s.cout) {
                row.copy_from_slice(bias);
            }
            for dy in 0..3 {
                // Output pixel (y, x) consumes padded columns x..x+3 of padded
                // row y+dy: a contiguous k = 3*cin span per pixel.
                let a_off = ((y + dy) * wp) * s.cin;
                gemm_strided(
                    &padded,
                    a_off,
                    1,
                    s.cin,
                    kernel,
                    dy * 3 * s.cin * s.cout,
                    s.cout,
                    out_img,
                    c_off,
                    s.cout,
                    s.w,
                    3 * s.cin,
                    s.cout,
                    true,
                    relu && dy == 2,
                );
            }
        }
    }
    out
}

/// Gradients of [`conv2d_forward`] (pre-activation): returns
/// `(dx, dkernel, dbias)`; `dx` is skipped when `need_dx` is false.
pub(crate) fn conv2d_backward(
    x: &[f64],
    kernel: &[f64],
    dy: &[f64],
    s: &ConvShape,
    need_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut dk = vec![0.0f64; 9 * s.cin * s.cout];
    let mut db = vec![0.0f64; s.cout];
    let mut dx = if need_dx {
        Some(vec![0.0f64; s.batch * s.image_len()])
    } else {
        None
    };
    // K^T per (dy, dx) tap: [3][3][cout][cin] for the input gradient.
    let kt: Vec<f64> = {
        let mut kt = vec![0.0f64; kernel.len()];
        for tap in 0..9 {
            let block = &kernel[tap * s.cin * s.cout..(tap + 1) * s.cin * s.cout];
            let t = transpose(block, s.cin, s.cout);
            kt[tap * s.cin * s.cout..(tap + 1) * s.cin * s.cout].copy_from_slice(&t);
        }
        kt
    };

    let wp = s.w + 2;
    let mut padded = vec![0.0f64; s.padded_len()];
    let mut dpadded = vec![0.0f64; s.padded_len()];
    for img in 0..s.batch {
        let x_img = &x[img * s.image_len()..(img + 1) * s.image_len()];
        let dy_img = &dy[img * s.out_len()..(img + 1) * s.out_len()];
        pad_image(x_img, s, &mut padded);

        for row in dy_img.chunks_exact(s.cout) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }

        for y in 0..s.h {
            let dy_off = y * s.w * s.cout;
            for dyk in 0..3 {
                let a_row = ((y + dyk) * wp) * s.cin;
                for dxk in 0..3 {
                    // dK[tap] += padded-slab^T * dY-row
                    gemm_strided(
                        &padded,
                        a_row + dxk * s.cin,
                        s.cin,
                        1,
                        dy_img,
                        dy_off,
                        s.cout,
                        &mut dk,
                        (dyk * 3 + dxk) * s.cin * s.cout,
                        s.cout,
                        s.cin,
                        s.w,
                        s.cout,
                        true,
                        false,
                    );
                }
            }
        }

        if let Some(dx_all) = dx.as_mut() {
            dpadded.fill(0.0);
            for y in 0..s.h {
                let dy_off = y * s.w * s.cout;
                for dyk in 0..3 {
                    for dxk in 0..3 {
                        // dXp[y+dy][x+dx] += dY[y][x] * K^T[tap]
                        let c_off = ((y + dyk) * wp + dxk) * s.cin;
                        gemm_strided(
                            dy_img,
                            dy_off,
                            1,
                            s.cout,
                            &kt,
                            (dyk * 3 + dxk) * s.cin * s.cout,
                            s.cin,
                            &mut dpadded,
                            c_off,
                            s.cin,
                            s.w,
                            s.cout,
                            s.cin,
                            true,
                            false,
                        );
                    }
                }
            }
            let dx_img = &mut dx_all[img * s.image_len()..(img + 1) * s.image_len()];
            for y in 0..s.h {
                let src = ((y + 1) * wp + 1) * s.cin;
                dx_img[y * s.w * s.cin..(y + 1) * s.w * s.cin]
                    .copy_from_slice(&dpadded[src..src + s.w * s.cin]);
            }
        }
    }
    (dx, dk, db)
}
