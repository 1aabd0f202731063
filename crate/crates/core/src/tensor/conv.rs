//! Spatial kernels on NCHW tensors: same-padding cross-correlation, 2x2
//! mean pooling and nearest-neighbor upsampling, plus their adjoints.
//!
//! The convolution is organized as plane-wise shifted AXPY / dot passes so
//! the inner loops run over contiguous rows and autovectorize.

use super::{Element, Tensor};
use crate::error::{Error, Result};

pub struct ConvDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
}

pub fn check_conv_shapes<E: Element>(
    x: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: &Tensor<E>,
) -> Result<ConvDims> {
    let xs = x.shape();
    let ks = kernel.shape();
    if xs.len() != 4 {
        return Err(Error::dim(format!("conv2d input must be NCHW, got {xs:?}")));
    }
    if ks.len() != 4 {
        return Err(Error::dim(format!("conv2d kernel must be OIHW, got {ks:?}")));
    }
    if ks[1] != xs[1] {
        return Err(Error::dim(format!(
            "conv2d channel mismatch: input has {} channels, kernel expects {}",
            xs[1], ks[1]
        )));
    }
    if ks[2] % 2 == 0 || ks[3] % 2 == 0 {
        return Err(Error::dim(format!(
            "conv2d kernel spatial size must be odd, got {}x{}",
            ks[2], ks[3]
        )));
    }
    if bias.shape() != [ks[0]] {
        return Err(Error::dim(format!(
            "conv2d bias must have shape [{}], got {:?}",
            ks[0],
            bias.shape()
        )));
    }
    Ok(ConvDims {
        batch: xs[0],
        c_in: xs[1],
        c_out: ks[0],
        h: xs[2],
        w: xs[3],
        kh: ks[2],
        kw: ks[3],
    })
}

/// `out[n,co] = bias[co] + sum_ci x[n,ci] (x) kernel[co,ci]`, zero padded.
pub fn conv2d_forward<E: Element>(
    x: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: &Tensor<E>,
) -> Result<Tensor<E>> {
    let d = check_conv_shapes(x, kernel, bias)?;
    let (h, w) = (d.h, d.w);
    let plane = h * w;
    let mut out = vec![E::zero(); d.batch * d.c_out * plane];
    let (ph, pw) = (d.kh / 2, d.kw / 2);

    for n in 0..d.batch {
        for co in 0..d.c_out {
            let o = &mut out[(n * d.c_out + co) * plane..(n * d.c_out + co + 1) * plane];
            let b = bias.data()[co];
            o.fill(b);
            for ci in 0..d.c_in {
                let xin = &x.data()[(n * d.c_in + ci) * plane..(n * d.c_in + ci + 1) * plane];
                let kbase = ((co * d.c_in + ci) * d.kh) * d.kw;
                for ky in 0..d.kh {
                    let dy = ky as isize - ph as isize;
                    for kx in 0..d.kw {
                        let dx = kx as isize - pw as isize;
                        let wgt = kernel.data()[kbase + ky * d.kw + kx];
                        shifted_axpy(o, xin, wgt, h, w, dy, dx);
                    }
                }
            }
        }
    }
    Tensor::new(vec![d.batch, d.c_out, h, w], out)
}

/// Adjoint w.r.t. the input: correlation of the output gradient with the
/// spatially flipped kernel, channels transposed.
pub fn conv2d_grad_input<E: Element>(
    g: &Tensor<E>,
    kernel: &Tensor<E>,
    x_shape: &[usize],
) -> Result<Tensor<E>> {
    let ks = kernel.shape();
    let (c_out, c_in, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
    let (batch, h, w) = (x_shape[0], x_shape[2], x_shape[3]);
    let plane = h * w;
    let (ph, pw) = (kh / 2, kw / 2);
    let mut dx = vec![E::zero(); batch * c_in * plane];

    for n in 0..batch {
        for ci in 0..c_in {
            let o = &mut dx[(n * c_in + ci) * plane..(n * c_in + ci + 1) * plane];
            for co in 0..c_out {
                let gp = &g.data()[(n * c_out + co) * plane..(n * c_out + co + 1) * plane];
                let kbase = ((co * c_in + ci) * kh) * kw;
                for ky in 0..kh {
                    let dy = ky as isize - ph as isize;
                    for kx in 0..kw {
                        let dx_ = kx as isize - pw as isize;
                        let wgt = kernel.data()[kbase + ky * kw + kx];
                        // out[y,x] contributed from in[y+dy,x+dx]; adjoint shifts by -d.
                        shifted_axpy(o, gp, wgt, h, w, -dy, -dx_);
                    }
                }
            }
        }
    }
    Tensor::new(x_shape.to_vec(), dx)
}

/// Adjoint w.r.t. the kernel.
pub fn conv2d_grad_kernel<E: Element>(
    g: &Tensor<E>,
    x: &Tensor<E>,
    kernel_shape: &[usize],
) -> Result<Tensor<E>> {
    let (c_out, c_in, kh, kw) = (
        kernel_shape[0],
        kernel_shape[1],
        kernel_shape[2],
        kernel_shape[3],
    );
    let xs = x.shape();
    let (batch, h, w) = (xs[0], xs[2], xs[3]);
    let plane = h * w;
    let (ph, pw) = (kh / 2, kw / 2);
    let mut dk = vec![E::zero(); c_out * c_in * kh * kw];

    for n in 0..batch {
        for co in 0..c_out {
            let gp = &g.data()[(n * c_out + co) * plane..(n * c_out + co + 1) * plane];
            for ci in 0..c_in {
                let xin = &x.data()[(n * c_in + ci) * plane..(n * c_in + ci + 1) * plane];
                let kbase = ((co * c_in + ci) * kh) * kw;
                for ky in 0..kh {
                    let dy = ky as isize - ph as isize;
                    for kx in 0..kw {
                        let dx = kx as isize - pw as isize;
                        dk[kbase + ky * kw + kx] += shifted_dot(gp, xin, h, w, dy, dx);
                    }
                }
            }
        }
    }
    Tensor::new(kernel_shape.to_vec(), dk)
}

pub fn conv2d_grad_bias<E: Element>(g: &Tensor<E>) -> Result<Tensor<E>> {
    let gs = g.shape();
    let (batch, c_out, plane) = (gs[0], gs[1], gs[2] * gs[3]);
    let mut db = vec![E::zero(); c_out];
    for n in 0..batch {
        for co in 0..c_out {
            let gp = &g.data()[(n * c_out + co) * plane..(n * c_out + co + 1) * plane];
            let mut acc = 0.0f64;
            for v in gp {
                acc += v.to_f64_val();
            }
            db[co] += E::from_f64(acc);
        }
    }
    Tensor::new(vec![c_out], db)
}

/// `out[y, x] += w * src[y + dy, x + dx]` over the in-range rectangle.
#[inline]
fn shifted_axpy<E: Element>(
    out: &mut [E],
    src: &[E],
    wgt: E,
    h: usize,
    w: usize,
    dy: isize,
    dx: isize,
) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy.max(0)) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx.max(0)) as usize;
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let orow = &mut out[y * w + x0..y * w + x1];
        let sy = (y as isize + dy) as usize;
        let sx = (x0 as isize + dx) as usize;
        let srow = &src[sy * w + sx..sy * w + sx + (x1 - x0)];
        for (o, s) in orow.iter_mut().zip(srow) {
            *o = s.mul_add(wgt, *o);
        }
    }
}

/// `sum_{y,x} a[y, x] * b[y + dy, x + dx]` over the in-range rectangle.
#[inline]
fn shifted_dot<E: Element>(a: &[E], b: &[E], h: usize, w: usize, dy: isize, dx: isize) -> E {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy.max(0)) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx.max(0)) as usize;
    if x0 >= x1 {
        return E::zero();
    }
    let mut total = E::zero();
    for y in y0..y1 {
        let arow = &a[y * w + x0..y * w + x1];
        let sy = (y as isize + dy) as usize;
        let sx = (x0 as isize + dx) as usize;
        let brow = &b[sy * w + sx..sy * w + sx + (x1 - x0)];
        total += dot(arow, brow);
    }
    total
}

/// Fixed-order multi-accumulator dot product; vectorizes without
/// reassociation and stays deterministic.
#[inline]
fn dot<E: Element>(a: &[E], b: &[E]) -> E {
    const LANES: usize = 8;
    let mut acc = [E::zero(); LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let pa = &a[i * LANES..(i + 1) * LANES];
        let pb = &b[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] = pa[l].mul_add(pb[l], acc[l]);
        }
    }
    let mut tail = E::zero();
    for i in chunks * LANES..a.len() {
        tail = a[i].mul_add(b[i], tail);
    }
    let mut s = tail;
    for v in acc {
        s += v;
    }
    s
}

/// 2x2 mean pooling; spatial dims must be even.
pub fn avg_pool2_forward<E: Element>(x: &Tensor<E>) -> Result<Tensor<E>> {
    let xs = x.shape();
    if xs.len() != 4 || xs[2] % 2 != 0 || xs[3] % 2 != 0 {
        return Err(Error::dim(format!(
            "avg_pool2 expects NCHW with even spatial dims, got {xs:?}"
        )));
    }
    let (batch, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (ho, wo) = (h / 2, w / 2);
    let quarter = E::from_f64(0.25);
    let mut out = vec![E::zero(); batch * c * ho * wo];
    for p in 0..batch * c {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
        for y in 0..ho {
            for xo in 0..wo {
                let base = 2 * y * w + 2 * xo;
                dst[y * wo + xo] =
                    (src[base] + src[base + 1] + src[base + w] + src[base + w + 1]) * quarter;
            }
        }
    }
    Tensor::new(vec![batch, c, ho, wo], out)
}

pub fn avg_pool2_backward<E: Element>(g: &Tensor<E>, x_shape: &[usize]) -> Result<Tensor<E>> {
    let (batch, c, h, w) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
    let (ho, wo) = (h / 2, w / 2);
    let quarter = E::from_f64(0.25);
    let mut out = vec![E::zero(); batch * c * h * w];
    for p in 0..batch * c {
        let src = &g.data()[p * ho * wo..(p + 1) * ho * wo];
        let dst = &mut out[p * h * w..(p + 1) * h * w];
        for y in 0..ho {
            for xo in 0..wo {
                let v = src[y * wo + xo] * quarter;
                let base = 2 * y * w + 2 * xo;
                dst[base] = v;
                dst[base + 1] = v;
                dst[base + w] = v;
                dst[base + w + 1] = v;
            }
        }
    }
    Tensor::new(x_shape.to_vec(), out)
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2_forward<E: Element>(x: &Tensor<E>) -> Result<Tensor<E>> {
    let xs = x.shape();
    if xs.len() != 4 {
        return Err(Error::dim(format!("upsample2 expects NCHW, got {xs:?}")));
    }
    let (batch, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (ho, wo) = (2 * h, 2 * w);
    let mut out = vec![E::zero(); batch * c * ho * wo];
    for p in 0..batch * c {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
        for y in 0..h {
            for xo in 0..w {
                let v = src[y * w + xo];
                let base = 2 * y * wo + 2 * xo;
                dst[base] = v;
                dst[base + 1] = v;
                dst[base + wo] = v;
                dst[base + wo + 1] = v;
            }
        }
    }
    Tensor::new(vec![batch, c, ho, wo], out)
}

pub fn upsample2_backward<E: Element>(g: &Tensor<E>, x_shape: &[usize]) -> Result<Tensor<E>> {
    let (batch, c, h, w) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
    let wo = 2 * w;
    let mut out = vec![E::zero(); batch * c * h * w];
    for p in 0..batch * c {
        let src = &g.data()[p * 4 * h * w..(p + 1) * 4 * h * w];
        let dst = &mut out[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xo in 0..w {
                let base = 2 * y * wo + 2 * xo;
                dst[y * w + xo] = src[base] + src[base + 1] + src[base + wo] + src[base + wo + 1];
            }
        }
    }
    Tensor::new(x_shape.to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_kernel_counts_padding() {
        // 1x1x3x3 ones input, 3x3 ones kernel: center 9, corners 4.
        let x = Tensor::<f32>::full(&[1, 1, 3, 3], 1.0);
        let k = Tensor::<f32>::full(&[1, 1, 3, 3], 1.0);
        let b = Tensor::<f32>::zeros(&[1]);
        let out = conv2d_forward(&x, &k, &b).unwrap();
        assert_eq!(out.data()[4], 9.0);
        assert_eq!(out.data()[0], 4.0);
        assert_eq!(out.data()[2], 4.0);
        assert_eq!(out.data()[6], 4.0);
        assert_eq!(out.data()[8], 4.0);
        // edges see 6 contributions
        assert_eq!(out.data()[1], 6.0);
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let x = Tensor::<f32>::randn(&[2, 1, 4, 5], &mut rng);
        let mut k = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        k.data_mut()[4] = 1.0;
        let b = Tensor::<f32>::zeros(&[1]);
        let out = conv2d_forward(&x, &k, &b).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]);
        let k = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        let b = Tensor::<f32>::zeros(&[1]);
        assert!(matches!(
            conv2d_forward(&x, &k, &b),
            Err(crate::error::Error::Dim(_))
        ));
    }

    #[test]
    fn pool_then_upsample_shapes() {
        let x = Tensor::<f32>::from_fn(&[1, 2, 4, 4], |i| i as f32);
        let p = avg_pool2_forward(&x).unwrap();
        assert_eq!(p.shape(), &[1, 2, 2, 2]);
        let u = upsample2_forward(&p).unwrap();
        assert_eq!(u.shape(), &[1, 2, 4, 4]);
        // mean of first 2x2 block of channel 0: (0 + 1 + 4 + 5) / 4
        assert_eq!(p.data()[0], 2.5);
    }

    #[test]
    fn pool_backward_distributes_evenly() {
        let g = Tensor::<f32>::full(&[1, 1, 1, 1], 1.0);
        let back = avg_pool2_backward(&g, &[1, 1, 2, 2]).unwrap();
        assert_eq!(back.data(), &[0.25, 0.25, 0.25, 0.25]);
    }
}
