//! Complex 2-D fields as (re, im) tensor pairs, plus the off-tape wave math
//! used to synthesize measurements and transfer functions.

use crate::error::{Error, Result};
use crate::fft;
use crate::tensor::Tensor;

/// A complex-valued H x W field stored as two real planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    re: Tensor,
    im: Tensor,
}

impl ComplexField {
    pub fn new(re: Tensor, im: Tensor) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::shape(
                "complex_field",
                format!("{:?} vs {:?}", re.shape(), im.shape()),
            ));
        }
        if re.shape().len() != 2 {
            return Err(Error::shape("complex_field", format!("expected [H,W], got {:?}", re.shape())));
        }
        Ok(ComplexField { re, im })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        ComplexField { re: Tensor::zeros(vec![h, w]), im: Tensor::zeros(vec![h, w]) }
    }

    pub fn re(&self) -> &Tensor {
        &self.re
    }

    pub fn im(&self) -> &Tensor {
        &self.im
    }

    pub fn height(&self) -> usize {
        self.re.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.re.shape()[1]
    }

    /// Packs into the [2, H, W] layout the tape uses for complex nodes.
    pub fn to_packed(&self) -> Tensor {
        let mut data = Vec::with_capacity(2 * self.re.numel());
        data.extend_from_slice(self.re.data());
        data.extend_from_slice(self.im.data());
        Tensor::new(vec![2, self.height(), self.width()], data).expect("consistent shape")
    }

    pub fn from_packed(packed: &Tensor) -> Result<Self> {
        let shape = packed.shape();
        if shape.len() != 3 || shape[0] != 2 {
            return Err(Error::shape("from_packed", format!("expected [2,H,W], got {:?}", shape)));
        }
        let (h, w) = (shape[1], shape[2]);
        let plane = h * w;
        let re = Tensor::new(vec![h, w], packed.data()[..plane].to_vec())?;
        let im = Tensor::new(vec![h, w], packed.data()[plane..].to_vec())?;
        ComplexField::new(re, im)
    }

    /// Elementwise complex product.
    pub fn mul(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.re.shape() != other.re.shape() {
            return Err(Error::shape(
                "complex_mul",
                format!("{:?} vs {:?}", self.re.shape(), other.re.shape()),
            ));
        }
        let n = self.re.numel();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        let (ar, ai) = (self.re.data(), self.im.data());
        let (br, bi) = (other.re.data(), other.im.data());
        for j in 0..n {
            re[j] = ar[j] * br[j] - ai[j] * bi[j];
            im[j] = ar[j] * bi[j] + ai[j] * br[j];
        }
        Ok(ComplexField {
            re: Tensor::new(self.re.shape().to_vec(), re)?,
            im: Tensor::new(self.re.shape().to_vec(), im)?,
        })
    }

    /// Multiplies every pixel by e^{i*theta}.
    pub fn rotate_phase(&self, theta: f64) -> ComplexField {
        let (c, s) = (theta.cos(), theta.sin());
        let n = self.re.numel();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for j in 0..n {
            re[j] = self.re.data()[j] * c - self.im.data()[j] * s;
            im[j] = self.re.data()[j] * s + self.im.data()[j] * c;
        }
        ComplexField {
            re: Tensor::new(self.re.shape().to_vec(), re).expect("same shape"),
            im: Tensor::new(self.re.shape().to_vec(), im).expect("same shape"),
        }
    }

    /// |u|^2 per pixel.
    pub fn squared_magnitude(&self) -> Tensor {
        let data = self
            .re
            .data()
            .iter()
            .zip(self.im.data())
            .map(|(r, i)| r * r + i * i)
            .collect();
        Tensor::new(self.re.shape().to_vec(), data).expect("same shape")
    }

    pub fn squared_norm(&self) -> f64 {
        self.re.squared_norm() + self.im.squared_norm()
    }
}

/// Unnormalized forward 2-D DFT.
pub fn fft2(field: &ComplexField) -> Result<ComplexField> {
    transform(field, false)
}

/// Inverse 2-D DFT carrying the 1/(H*W) factor.
pub fn ifft2(field: &ComplexField) -> Result<ComplexField> {
    transform(field, true)
}

fn transform(field: &ComplexField, inverse: bool) -> Result<ComplexField> {
    let (h, w) = (field.height(), field.width());
    let mut re = field.re.data().to_vec();
    let mut im = field.im.data().to_vec();
    fft::fft2_planes(&mut re, &mut im, h, w, inverse)?;
    Ok(ComplexField { re: Tensor::new(vec![h, w], re)?, im: Tensor::new(vec![h, w], im)? })
}
