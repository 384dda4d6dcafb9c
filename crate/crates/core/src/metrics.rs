//! PSNR and SSIM for images in [0, 1].

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// SSIM window: 11x11 Gaussian, sigma 1.5; the universal defaults.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
}

fn plane_dims(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [h, w] => Ok((*h, *w)),
        [1, h, w] => Ok((*h, *w)),
        other => Err(Error::shape("metrics", format!("expected a single plane, got {:?}", other))),
    }
}

fn check_pair(a: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    let (h, w) = plane_dims(a)?;
    let (h2, w2) = plane_dims(b)?;
    if (h, w) != (h2, w2) {
        return Err(Error::shape("metrics", format!("{}x{} vs {}x{}", h, w, h2, w2)));
    }
    Ok((h, w))
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// 10*log10(1/MSE) over [0,1]-clamped pixels; +inf when the images agree.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.numel() as f64;
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = clamp01(x) - clamp01(y);
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Valid-mode separable filter: horizontal pass then vertical pass.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let kw = k.len();
    let ow = w - kw + 1;
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut horiz[y * ow..(y + 1) * ow];
        for x in 0..ow {
            let mut acc = 0.0;
            for (j, &kv) in k.iter().enumerate() {
                acc += kv * row[x + j];
            }
            out[x] = acc;
        }
    }
    let oh = h - kw + 1;
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (j, &kv) in k.iter().enumerate() {
                acc += kv * horiz[(y + j) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    (out, oh, ow)
}

/// Mean local SSIM with the Gaussian window above; dynamic range L = 1.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (h, w) = check_pair(a, b)?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Config(format!(
            "image {}x{} smaller than the {}x{} SSIM window",
            h, w, SSIM_WINDOW, SSIM_WINDOW
        )));
    }
    let x: Vec<f64> = a.data().iter().map(|&v| clamp01(v)).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| clamp01(v)).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let k = gaussian_window();
    let (mu_x, oh, ow) = filter_valid(&x, h, w, &k);
    let (mu_y, _, _) = filter_valid(&y, h, w, &k);
    let (e_xx, _, _) = filter_valid(&xx, h, w, &k);
    let (e_yy, _, _) = filter_valid(&yy, h, w, &k);
    let (e_xy, _, _) = filter_valid(&xy, h, w, &k);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..oh * ow {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
        total += num / den;
    }
    Ok(total / (oh * ow) as f64)
}

pub fn report(reconstruction: &Tensor, ground_truth: &Tensor) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(reconstruction, ground_truth)?,
        ssim: ssim(reconstruction, ground_truth)?,
    })
}
