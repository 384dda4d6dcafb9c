//! Dense row-major `f64` tensors and the raw kernels the tape records.
//!
//! Every kernel here is a pure function of its inputs; the tape wraps them
//! with adjoint rules. Shapes are explicit `Vec<usize>` lists and an empty
//! batch/broadcast story is deliberate: operands must match exactly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {:?} implies {} elements, got {}", shape, n, data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![value; n] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same data, new shape (element count must match).
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

fn check_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape, b.shape)));
    }
    Ok(())
}

fn zip(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    check_same_shape(op, a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor { shape: a.shape.clone(), data })
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip("sub", a, b, |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip("mul", a, b, |x, y| x * y)
}

pub fn div(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip("div", a, b, |x, y| x / y)
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    a.map(|v| v * c)
}

/// In-place a += b, used by gradient accumulation.
pub fn add_assign(a: &mut Tensor, b: &Tensor) {
    debug_assert_eq!(a.shape, b.shape);
    for (x, y) in a.data.iter_mut().zip(&b.data) {
        *x += y;
    }
}

/// mat is [m, n]; v may have any shape with n elements. Returns [m].
pub fn matvec(mat: &Tensor, v: &Tensor) -> Result<Tensor> {
    if mat.shape.len() != 2 {
        return Err(Error::shape("matvec", format!("matrix must be 2-D, got {:?}", mat.shape)));
    }
    let (m, n) = (mat.shape[0], mat.shape[1]);
    if v.numel() != n {
        return Err(Error::shape(
            "matvec",
            format!("matrix is {}x{}, vector has {} elements", m, n, v.numel()),
        ));
    }
    let mut out = vec![0.0; m];
    for (i, row) in mat.data.chunks_exact(n).enumerate() {
        let mut acc = 0.0;
        for (a, x) in row.iter().zip(&v.data) {
            acc += a * x;
        }
        out[i] = acc;
    }
    Tensor::new(vec![m], out)
}

/// matᵀ·g reshaped to `v_shape`; the matvec adjoint w.r.t. the vector.
pub fn matvec_adjoint_vec(mat: &Tensor, g: &Tensor, v_shape: &[usize]) -> Tensor {
    let (m, n) = (mat.shape[0], mat.shape[1]);
    debug_assert_eq!(g.numel(), m);
    let mut out = vec![0.0; n];
    for (i, row) in mat.data.chunks_exact(n).enumerate() {
        let gi = g.data[i];
        if gi != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += gi * a;
            }
        }
    }
    Tensor { shape: v_shape.to_vec(), data: out }
}

/// Outer product g·vᵀ, the matvec adjoint w.r.t. the matrix. Returns [m, n].
pub fn matvec_adjoint_mat(g: &Tensor, v: &Tensor) -> Tensor {
    let m = g.numel();
    let n = v.numel();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let gi = g.data[i];
        let row = &mut out[i * n..(i + 1) * n];
        for (o, x) in row.iter_mut().zip(&v.data) {
            *o = gi * x;
        }
    }
    Tensor { shape: vec![m, n], data: out }
}

/// 3x3 convolution, stride 1, zero padding 1.
/// input [C_in, H, W], kernel [C_out, C_in, 3, 3] -> [C_out, H, W].
pub fn conv2d(input: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    if input.shape.len() != 3 {
        return Err(Error::shape("conv2d", format!("input must be [C,H,W], got {:?}", input.shape)));
    }
    if kernel.shape.len() != 4 || kernel.shape[2] != 3 || kernel.shape[3] != 3 {
        return Err(Error::shape(
            "conv2d",
            format!("kernel must be [C_out,C_in,3,3], got {:?}", kernel.shape),
        ));
    }
    let (c_in, h, w) = (input.shape[0], input.shape[1], input.shape[2]);
    let (c_out, kc_in) = (kernel.shape[0], kernel.shape[1]);
    if kc_in != c_in {
        return Err(Error::shape(
            "conv2d",
            format!("kernel expects {} input channels, input has {}", kc_in, c_in),
        ));
    }
    let plane = h * w;
    let mut out = vec![0.0; c_out * plane];
    for co in 0..c_out {
        let out_plane = &mut out[co * plane..(co + 1) * plane];
        for ci in 0..c_in {
            let in_plane = &input.data[ci * plane..(ci + 1) * plane];
            let k = &kernel.data[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9];
            accumulate_conv_plane(out_plane, in_plane, k, h, w);
        }
    }
    Tensor::new(vec![c_out, h, w], out)
}

/// out += conv(in, k) for one (out-channel, in-channel) plane pair.
fn accumulate_conv_plane(out: &mut [f64], input: &[f64], k: &[f64], h: usize, w: usize) {
    for y in 0..h {
        let ym = y > 0;
        let yp = y + 1 < h;
        let row = &mut out[y * w..(y + 1) * w];
        for dy in 0..3usize {
            if (dy == 0 && !ym) || (dy == 2 && !yp) {
                continue;
            }
            let iy = y + dy - 1;
            let in_row = &input[iy * w..(iy + 1) * w];
            let (k0, k1, k2) = (k[dy * 3], k[dy * 3 + 1], k[dy * 3 + 2]);
            // x == 0 and x == w-1 handled separately to keep the inner loop branch-free
            if w == 1 {
                row[0] += k1 * in_row[0];
                continue;
            }
            row[0] += k1 * in_row[0] + k2 * in_row[1];
            for x in 1..w - 1 {
                row[x] += k0 * in_row[x - 1] + k1 * in_row[x] + k2 * in_row[x + 1];
            }
            row[w - 1] += k0 * in_row[w - 2] + k1 * in_row[w - 1];
        }
    }
}

/// Adjoint of conv2d w.r.t. its input: correlation of g with the kernel.
pub fn conv2d_adjoint_input(g: &Tensor, kernel: &Tensor, input_shape: &[usize]) -> Tensor {
    let (c_in, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let c_out = kernel.shape()[0];
    let plane = h * w;
    let mut out = vec![0.0; c_in * plane];
    // conv with the spatially flipped kernel, channels transposed
    for ci in 0..c_in {
        let out_plane = &mut out[ci * plane..(ci + 1) * plane];
        for co in 0..c_out {
            let g_plane = &g.data()[co * plane..(co + 1) * plane];
            let k = &kernel.data()[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9];
            let flipped = [k[8], k[7], k[6], k[5], k[4], k[3], k[2], k[1], k[0]];
            accumulate_conv_plane(out_plane, g_plane, &flipped, h, w);
        }
    }
    Tensor { shape: input_shape.to_vec(), data: out }
}

/// Adjoint of conv2d w.r.t. the kernel.
pub fn conv2d_adjoint_kernel(g: &Tensor, input: &Tensor, kernel_shape: &[usize]) -> Tensor {
    let (c_out, c_in) = (kernel_shape[0], kernel_shape[1]);
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let plane = h * w;
    let mut out = vec![0.0; c_out * c_in * 9];
    for co in 0..c_out {
        let g_plane = &g.data()[co * plane..(co + 1) * plane];
        for ci in 0..c_in {
            let in_plane = &input.data()[ci * plane..(ci + 1) * plane];
            let k = &mut out[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9];
            for dy in 0..3usize {
                for dx in 0..3usize {
                    let mut acc = 0.0;
                    let y_lo = 1usize.saturating_sub(dy);
                    let y_hi = (h + 1 - dy).min(h);
                    let x_lo = 1usize.saturating_sub(dx);
                    let x_hi = (w + 1 - dx).min(w);
                    for y in y_lo..y_hi {
                        let g_row = &g_plane[y * w..y * w + w];
                        let in_row = &in_plane[(y + dy - 1) * w..(y + dy - 1) * w + w];
                        for x in x_lo..x_hi {
                            acc += g_row[x] * in_row[x + dx - 1];
                        }
                    }
                    k[dy * 3 + dx] = acc;
                }
            }
        }
    }
    Tensor { shape: kernel_shape.to_vec(), data: out }
}

/// Nearest-neighbour 2x upsample: [C, H, W] -> [C, 2H, 2W].
pub fn upsample2x(input: &Tensor) -> Result<Tensor> {
    if input.shape.len() != 3 {
        return Err(Error::shape("upsample2x", format!("expected [C,H,W], got {:?}", input.shape)));
    }
    let (c, h, w) = (input.shape[0], input.shape[1], input.shape[2]);
    let mut out = vec![0.0; c * 4 * h * w];
    let (oh, ow) = (2 * h, 2 * w);
    for ch in 0..c {
        for y in 0..h {
            let in_row = &input.data[ch * h * w + y * w..ch * h * w + (y + 1) * w];
            for rep in 0..2 {
                let oy = 2 * y + rep;
                let out_row = &mut out[ch * oh * ow + oy * ow..ch * oh * ow + (oy + 1) * ow];
                for x in 0..w {
                    out_row[2 * x] = in_row[x];
                    out_row[2 * x + 1] = in_row[x];
                }
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Adjoint of upsample2x: sums each 2x2 output block back onto its source.
pub fn upsample2x_adjoint(g: &Tensor, input_shape: &[usize]) -> Tensor {
    let (c, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            let out_row = &mut out[ch * h * w + y * w..ch * h * w + (y + 1) * w];
            for rep in 0..2 {
                let oy = 2 * y + rep;
                let g_row = &g.data()[ch * oh * ow + oy * ow..ch * oh * ow + (oy + 1) * ow];
                for x in 0..w {
                    out_row[x] += g_row[2 * x] + g_row[2 * x + 1];
                }
            }
        }
    }
    Tensor { shape: input_shape.to_vec(), data: out }
}

/// Per-channel affine: out[c] = gamma[c] * input[c] + beta[c].
pub fn channel_affine(input: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
    if input.shape.len() != 3 {
        return Err(Error::shape("channel_affine", format!("expected [C,H,W], got {:?}", input.shape)));
    }
    let c = input.shape[0];
    if gamma.numel() != c || beta.numel() != c {
        return Err(Error::shape(
            "channel_affine",
            format!("{} channels but gamma/beta have {}/{}", c, gamma.numel(), beta.numel()),
        ));
    }
    let plane = input.shape[1] * input.shape[2];
    let mut out = vec![0.0; input.numel()];
    for ch in 0..c {
        let (gm, bt) = (gamma.data[ch], beta.data[ch]);
        let src = &input.data[ch * plane..(ch + 1) * plane];
        let dst = &mut out[ch * plane..(ch + 1) * plane];
        for (d, s) in dst.iter_mut().zip(src) {
            *d = gm * s + bt;
        }
    }
    Tensor::new(input.shape.clone(), out)
}

/// One channel plane of a [C, H, W] tensor as a [H, W] tensor.
pub fn slice_channel(input: &Tensor, channel: usize) -> Result<Tensor> {
    if input.shape.len() != 3 {
        return Err(Error::shape("slice_channel", format!("expected [C,H,W], got {:?}", input.shape)));
    }
    let (c, h, w) = (input.shape[0], input.shape[1], input.shape[2]);
    if channel >= c {
        return Err(Error::shape("slice_channel", format!("channel {} of {}", channel, c)));
    }
    let plane = h * w;
    Tensor::new(vec![h, w], input.data[channel * plane..(channel + 1) * plane].to_vec())
}

/// Stacks two [H, W] planes into a [2, H, W] tensor (used as a complex field).
pub fn stack2(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("stack2", a, b)?;
    if a.shape.len() != 2 {
        return Err(Error::shape("stack2", format!("expected [H,W] planes, got {:?}", a.shape)));
    }
    let mut data = Vec::with_capacity(2 * a.numel());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::new(vec![2, a.shape[0], a.shape[1]], data)
}

/// Elementwise complex product of two packed [2, H, W] fields.
pub fn complex_mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("complex_mul", a, b)?;
    if a.shape.len() != 3 || a.shape[0] != 2 {
        return Err(Error::shape("complex_mul", format!("expected [2,H,W], got {:?}", a.shape)));
    }
    let plane = a.shape[1] * a.shape[2];
    let (ar, ai) = a.data.split_at(plane);
    let (br, bi) = b.data.split_at(plane);
    let mut data = vec![0.0; 2 * plane];
    {
        let (or_, oi) = data.split_at_mut(plane);
        for j in 0..plane {
            or_[j] = ar[j] * br[j] - ai[j] * bi[j];
            oi[j] = ar[j] * bi[j] + ai[j] * br[j];
        }
    }
    Tensor::new(a.shape.clone(), data)
}

/// |u|^2 per pixel of a packed [2, H, W] field -> [H, W].
pub fn squared_magnitude(a: &Tensor) -> Result<Tensor> {
    if a.shape.len() != 3 || a.shape[0] != 2 {
        return Err(Error::shape("squared_magnitude", format!("expected [2,H,W], got {:?}", a.shape)));
    }
    let plane = a.shape[1] * a.shape[2];
    let (re, im) = a.data.split_at(plane);
    let data = re.iter().zip(im).map(|(r, i)| r * r + i * i).collect();
    Tensor::new(vec![a.shape[1], a.shape[2]], data)
}
