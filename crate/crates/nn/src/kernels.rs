//! Numeric kernels behind the graph ops: convolution, pooling, bilinear
//! upsampling and their adjoints. Loops are arranged so the innermost pass
//! runs over contiguous rows with hoisted bounds, and everything stays
//! deterministic (fixed accumulation order).

use lltext_core::Scalar;

use crate::tensor::Tensor;

/// Output spatial size of a convolution.
pub fn conv_out_dim(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad - k) / stride + 1
}

/// Valid output range [lo, hi) so that `ox*stride + kx - pad` stays inside
/// `[0, n)`.
#[inline]
fn valid_out_range(n: usize, k_off: usize, stride: usize, pad: usize, out_n: usize) -> (usize, usize) {
    // ix = ox*stride + k_off - pad  >= 0  and  < n
    let lo = if k_off >= pad {
        0
    } else {
        (pad - k_off).div_ceil(stride)
    };
    let hi_raw = n + pad;
    let hi = if hi_raw > k_off {
        ((hi_raw - k_off - 1) / stride + 1).min(out_n)
    } else {
        0
    };
    (lo.min(out_n), hi)
}

/// 2D convolution (cross-correlation) of `[cin, h, w]` with `[cout, cin, kh, kw]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
) -> Tensor<T> {
    let (cin, h, w) = input.chw();
    let ws = weight.shape();
    assert_eq!(ws.len(), 4, "conv weight must be [out, in, kh, kw]");
    let (cout, wcin, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    assert_eq!(cin, wcin, "conv input channels {cin} != weight channels {wcin}");
    let oh = conv_out_dim(h, kh, stride, pad);
    let ow = conv_out_dim(w, kw, stride, pad);
    let mut out = Tensor::zeros(vec![cout, oh, ow]);
    let idata = input.data();
    let wdata = weight.data();
    let odata = out.data_mut();

    if let Some(b) = bias {
        for co in 0..cout {
            let v = b.data()[co];
            for o in &mut odata[co * oh * ow..(co + 1) * oh * ow] {
                *o = v;
            }
        }
    }
    for co in 0..cout {
        for ci in 0..cin {
            for ky in 0..kh {
                let wrow = &wdata[((co * cin + ci) * kh + ky) * kw..][..kw];
                for (kx, &wv) in wrow.iter().enumerate() {
                    if wv == T::zero() {
                        continue;
                    }
                    let (ox_lo, ox_hi) = valid_out_range(w, kx, stride, pad, ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let in_row = &idata[(ci * h + iy as usize) * w..][..w];
                        let out_row = &mut odata[(co * oh + oy) * ow..][..ow];
                        let base = kx as isize - pad as isize;
                        if stride == 1 {
                            let ix0 = (ox_lo as isize + base) as usize;
                            for (o, i) in out_row[ox_lo..ox_hi]
                                .iter_mut()
                                .zip(&in_row[ix0..ix0 + (ox_hi - ox_lo)])
                            {
                                *o += wv * *i;
                            }
                        } else {
                            for ox in ox_lo..ox_hi {
                                let ix = (ox * stride) as isize + base;
                                out_row[ox] += wv * in_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`conv2d`] w.r.t. input, weight and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (cin, h, w) = input.chw();
    let ws = weight.shape();
    let (cout, _, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    let (_, oh, ow) = grad_out.chw();
    let mut gi = Tensor::zeros(vec![cin, h, w]);
    let mut gw = Tensor::zeros(weight.shape().to_vec());
    let mut gb = Tensor::zeros(vec![cout]);
    let idata = input.data();
    let wdata = weight.data();
    let gdata = grad_out.data();

    for co in 0..cout {
        let mut acc = T::zero();
        for v in &gdata[co * oh * ow..(co + 1) * oh * ow] {
            acc += *v;
        }
        gb.data_mut()[co] = acc;
    }

    let gidata = gi.data_mut();
    let gwdata = gw.data_mut();
    for co in 0..cout {
        for ci in 0..cin {
            for ky in 0..kh {
                for kx in 0..kw {
                    let widx = ((co * cin + ci) * kh + ky) * kw + kx;
                    let wv = wdata[widx];
                    let (ox_lo, ox_hi) = valid_out_range(w, kx, stride, pad, ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let base = kx as isize - pad as isize;
                    let mut wacc = T::zero();
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let g_row = &gdata[(co * oh + oy) * ow..][..ow];
                        let i_off = (ci * h + iy as usize) * w;
                        if stride == 1 {
                            let ix0 = (ox_lo as isize + base) as usize;
                            let in_row = &idata[i_off + ix0..i_off + ix0 + (ox_hi - ox_lo)];
                            let gi_row = &mut gidata[i_off + ix0..i_off + ix0 + (ox_hi - ox_lo)];
                            for ((gv, iv), giv) in g_row[ox_lo..ox_hi]
                                .iter()
                                .zip(in_row)
                                .zip(gi_row.iter_mut())
                            {
                                wacc += *gv * *iv;
                                *giv += *gv * wv;
                            }
                        } else {
                            for ox in ox_lo..ox_hi {
                                let ix = ((ox * stride) as isize + base) as usize;
                                let gv = g_row[ox];
                                wacc += gv * idata[i_off + ix];
                                gidata[i_off + ix] += gv * wv;
                            }
                        }
                    }
                    gwdata[widx] += wacc;
                }
            }
        }
    }
    (gi, gw, gb)
}

/// Non-overlapping k×k average pooling. Spatial dims must divide by `k`.
pub fn avg_pool<T: Scalar>(input: &Tensor<T>, k: usize) -> Tensor<T> {
    let (c, h, w) = input.chw();
    assert!(h % k == 0 && w % k == 0, "avg_pool {k} on {h}x{w}");
    let (oh, ow) = (h / k, w / k);
    let inv = T::of(1.0 / (k * k) as f64);
    let mut out = Tensor::zeros(vec![c, oh, ow]);
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = T::zero();
                for dy in 0..k {
                    for dx in 0..k {
                        acc += input.at3(ci, oy * k + dy, ox * k + dx);
                    }
                }
                out.data_mut()[(ci * oh + oy) * ow + ox] = acc * inv;
            }
        }
    }
    out
}

pub fn avg_pool_backward<T: Scalar>(grad_out: &Tensor<T>, k: usize, h: usize, w: usize) -> Tensor<T> {
    let (c, oh, ow) = grad_out.chw();
    let inv = T::of(1.0 / (k * k) as f64);
    let mut gi = Tensor::zeros(vec![c, h, w]);
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = grad_out.at3(ci, oy, ox) * inv;
                for dy in 0..k {
                    for dx in 0..k {
                        gi.data_mut()[(ci * h + oy * k + dy) * w + ox * k + dx] += g;
                    }
                }
            }
        }
    }
    gi
}

/// Source taps and weights of one bilinear ×2 output coordinate
/// (half-pixel-center convention, edges replicated).
#[inline]
fn upsample_taps(o: usize, n: usize) -> (usize, usize, f64) {
    let s = ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear ×2 upsampling.
pub fn upsample2x<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = input.chw();
    let (oh, ow) = (h * 2, w * 2);
    let mut out = Tensor::zeros(vec![c, oh, ow]);
    for oy in 0..oh {
        let (y0, y1, fy) = upsample_taps(oy, h);
        let fy = T::of(fy);
        for ox in 0..ow {
            let (x0, x1, fx) = upsample_taps(ox, w);
            let fx = T::of(fx);
            for ci in 0..c {
                let top = input.at3(ci, y0, x0) * (T::one() - fx) + input.at3(ci, y0, x1) * fx;
                let bot = input.at3(ci, y1, x0) * (T::one() - fx) + input.at3(ci, y1, x1) * fx;
                out.data_mut()[(ci * oh + oy) * ow + ox] = top * (T::one() - fy) + bot * fy;
            }
        }
    }
    out
}

pub fn upsample2x_backward<T: Scalar>(grad_out: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let (c, oh, ow) = grad_out.chw();
    let mut gi = Tensor::zeros(vec![c, h, w]);
    for oy in 0..oh {
        let (y0, y1, fy) = upsample_taps(oy, h);
        let fy = T::of(fy);
        for ox in 0..ow {
            let (x0, x1, fx) = upsample_taps(ox, w);
            let fx = T::of(fx);
            for ci in 0..c {
                let g = grad_out.at3(ci, oy, ox);
                let base = ci * h * w;
                gi.data_mut()[base + y0 * w + x0] += g * (T::one() - fy) * (T::one() - fx);
                gi.data_mut()[base + y0 * w + x1] += g * (T::one() - fy) * fx;
                gi.data_mut()[base + y1 * w + x0] += g * fy * (T::one() - fx);
                gi.data_mut()[base + y1 * w + x1] += g * fy * fx;
            }
        }
    }
    gi
}
