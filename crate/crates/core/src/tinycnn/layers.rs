//! Per-sample kernels on HWC slices. Convolutions go through im2col and a
//! GEMM; the column buffers are owned by the caller and reused.

use super::config::{ConvGeom, PoolGeom};

/// `c = a * b + beta * c` for row-major operands; `a_t` / `b_t` read the
/// stored matrix transposed (`a` stored `k x m`, `b` stored `n x k`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the bounds assert above covers every element addressed by the
    // given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fills `cols` (`out_pixels x patch_len`) with zero-padded input patches.
/// Patch entries are ordered `(ky, kx, channel)` to match `[k, k, in, out]`
/// weights.
pub(crate) fn im2col(g: &ConvGeom, x: &[f64], cols: &mut [f64]) {
    let k = g.kernel;
    let c = g.in_c;
    let patch = g.patch_len();
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = &mut cols[(oy * g.out_w + ox) * patch..][..patch];
            for ky in 0..k {
                let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                for kx in 0..k {
                    let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                    let dst = &mut row[(ky * k + kx) * c..][..c];
                    if iy < 0 || ix < 0 || iy >= g.in_h as isize || ix >= g.in_w as isize {
                        dst.fill(0.0);
                    } else {
                        let src = (iy as usize * g.in_w + ix as usize) * c;
                        dst.copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
    }
}

/// Scatter-adds column gradients back onto the input gradient.
pub(crate) fn col2im(g: &ConvGeom, dcols: &[f64], dx: &mut [f64]) {
    let k = g.kernel;
    let c = g.in_c;
    let patch = g.patch_len();
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = &dcols[(oy * g.out_w + ox) * patch..][..patch];
            for ky in 0..k {
                let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                if iy < 0 || iy >= g.in_h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                    if ix < 0 || ix >= g.in_w as isize {
                        continue;
                    }
                    let dst = (iy as usize * g.in_w + ix as usize) * c;
                    for (d, s) in dx[dst..dst + c].iter_mut().zip(&row[(ky * k + kx) * c..][..c]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward(
    g: &ConvGeom,
    x: &[f64],
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
    cols: &mut [f64],
) {
    im2col(g, x, cols);
    for px in out.chunks_exact_mut(g.out_c) {
        px.copy_from_slice(bias);
    }
    gemm(g.out_pixels(), g.patch_len(), g.out_c, cols, false, weight, false, 1.0, out);
}

/// Accumulates weight and bias gradients; writes the input gradient into
/// `dx` (overwriting) when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    g: &ConvGeom,
    x: &[f64],
    dout: &[f64],
    weight: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    dx: Option<&mut [f64]>,
    cols: &mut [f64],
) {
    im2col(g, x, cols);
    gemm(g.patch_len(), g.out_pixels(), g.out_c, cols, true, dout, false, 1.0, dweight);
    for px in dout.chunks_exact(g.out_c) {
        for (b, d) in dbias.iter_mut().zip(px) {
            *b += d;
        }
    }
    if let Some(dx) = dx {
        gemm(g.out_pixels(), g.out_c, g.patch_len(), dout, false, weight, true, 0.0, cols);
        dx.fill(0.0);
        col2im(g, cols, dx);
    }
}

pub(crate) fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes gradient entries whose forward output was not positive.
pub(crate) fn relu_backward(out: &[f64], grad: &mut [f64]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Writes the window maxima and the input offset of each maximum. The first
/// maximum in scan order wins ties.
pub(crate) fn maxpool_forward(g: &PoolGeom, x: &[f64], out: &mut [f64], arg: &mut [usize]) {
    let c = g.channels;
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0;
                for dy in 0..g.size {
                    for dx in 0..g.size {
                        let at = ((oy * g.size + dy) * g.in_w + ox * g.size + dx) * c + ch;
                        if x[at] > best {
                            best = x[at];
                            best_at = at;
                        }
                    }
                }
                let o = (oy * g.out_w + ox) * c + ch;
                out[o] = best;
                arg[o] = best_at;
            }
        }
    }
}

pub(crate) fn maxpool_backward(dout: &[f64], arg: &[usize], dx: &mut [f64]) {
    dx.fill(0.0);
    for (&d, &at) in dout.iter().zip(arg) {
        dx[at] += d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
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

    #[test]
    fn pool_picks_first_max() {
        let g = PoolGeom {
            in_h: 2,
            in_w: 2,
            channels: 1,
            size: 2,
            out_h: 1,
            out_w: 1,
        };
        let mut out = [0.0];
        let mut arg = [9];
        maxpool_forward(&g, &[1.0, 3.0, 3.0, 2.0], &mut out, &mut arg);
        assert_eq!((out[0], arg[0]), (3.0, 1));
        let mut dx = [7.0; 4];
        maxpool_backward(&[2.0], &arg, &mut dx);
        assert_eq!(dx, [0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn ones_kernel_on_constant_image_counts_neighbours() {
        // 3x3 kernel of ones over a 5x5 image of twos, zero "same" padding:
        // interior pixels see 9 inputs, edges 6, corners 4.
        let g = ConvGeom::same(5, 5, 1, 1, 3, 1);
        let x = [2.0; 25];
        let mut out = [0.0; 25];
        let mut cols = vec![0.0; g.out_pixels() * g.patch_len()];
        conv_forward(&g, &x, &[1.0; 9], &[0.5], &mut out, &mut cols);
        let expected = |y: usize, x: usize| {
            let span = |v: usize| if v == 0 || v == 4 { 2.0 } else { 3.0 };
            2.0 * span(y) * span(x) + 0.5
        };
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(out[y * 5 + x], expected(y, x), "pixel ({y}, {x})");
            }
        }
    }

    #[test]
    fn strided_conv_samples_every_other_pixel() {
        // 4x4 input, stride 2: output 2x2, total padding 1 all on the far
        // side, so output (oy, ox) centres on input (2oy + 1, 2ox + 1).
        let g = ConvGeom::same(4, 4, 1, 1, 3, 2);
        assert_eq!((g.out_h, g.out_w, g.pad_top, g.pad_left), (2, 2, 0, 0));
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let mut centre = [0.0; 9];
        centre[4] = 1.0;
        let mut out = [0.0; 4];
        let mut cols = vec![0.0; g.out_pixels() * g.patch_len()];
        conv_forward(&g, &x, &centre, &[0.0], &mut out, &mut cols);
        assert_eq!(out, [5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)> for any x, c
        let g = ConvGeom::same(4, 5, 2, 1, 3, 2);
        let x: Vec<f64> = (0..g.in_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let c: Vec<f64> = (0..g.out_pixels() * g.patch_len())
            .map(|i| (i as f64 * 0.11).cos())
            .collect();
        let mut cols = vec![0.0; c.len()];
        im2col(&g, &x, &mut cols);
        let mut dx = vec![0.0; x.len()];
        col2im(&g, &c, &mut dx);
        let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
