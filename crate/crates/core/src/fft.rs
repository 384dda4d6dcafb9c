//! Radix-2 Cooley-Tukey FFT over split re/im planes.
//!
//! Power-of-two sizes only. Forward transform is unnormalized; the inverse
//! carries the full 1/(H*W) factor, so `ifft2(fft2(u)) == u` and Parseval
//! reads `||fft2(u)||^2 == H*W * ||u||^2`.

use crate::error::{Error, Result};

fn check_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::FftSize(n));
    }
    Ok(())
}

/// In-place 1-D FFT of length `n == re.len() == im.len()`.
/// Twiddles are supplied so 2-D callers can share one table per axis.
fn fft1d(re: &mut [f64], im: &mut [f64], tw_re: &[f64], tw_im: &[f64]) {
    let n = re.len();
    if n <= 1 {
        return;
    }
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 0..n - 1 {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut mask = n >> 1;
        while j & mask != 0 {
            j &= !mask;
            mask >>= 1;
        }
        j |= mask;
    }
    // butterflies; twiddle table holds e^{+/-2*pi*i*k/n} for k < n/2
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let (wr, wi) = (tw_re[k * stride], tw_im[k * stride]);
                let (i0, i1) = (start + k, start + k + half);
                let tr = wr * re[i1] - wi * im[i1];
                let ti = wr * im[i1] + wi * re[i1];
                re[i1] = re[i0] - tr;
                im[i1] = im[i0] - ti;
                re[i0] += tr;
                im[i0] += ti;
            }
        }
        len <<= 1;
    }
}

fn twiddles(n: usize, inverse: bool) -> (Vec<f64>, Vec<f64>) {
    let half = (n / 2).max(1);
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut tw_re = Vec::with_capacity(half);
    let mut tw_im = Vec::with_capacity(half);
    for k in 0..half {
        let ang = sign * 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        tw_re.push(ang.cos());
        tw_im.push(ang.sin());
    }
    (tw_re, tw_im)
}

/// 2-D transform of row-major re/im planes of size h x w.
/// `inverse` applies the conjugate kernel and the 1/(h*w) factor.
pub fn fft2_planes(re: &mut [f64], im: &mut [f64], h: usize, w: usize, inverse: bool) -> Result<()> {
    check_pow2(h)?;
    check_pow2(w)?;
    debug_assert_eq!(re.len(), h * w);
    debug_assert_eq!(im.len(), h * w);

    let (row_tw_re, row_tw_im) = twiddles(w, inverse);
    for y in 0..h {
        fft1d(&mut re[y * w..(y + 1) * w], &mut im[y * w..(y + 1) * w], &row_tw_re, &row_tw_im);
    }

    let (col_tw_re, col_tw_im) = if h == w {
        (row_tw_re, row_tw_im)
    } else {
        twiddles(h, inverse)
    };
    let mut cre = vec![0.0; h];
    let mut cim = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            cre[y] = re[y * w + x];
            cim[y] = im[y * w + x];
        }
        fft1d(&mut cre, &mut cim, &col_tw_re, &col_tw_im);
        for y in 0..h {
            re[y * w + x] = cre[y];
            im[y * w + x] = cim[y];
        }
    }

    if inverse {
        let norm = 1.0 / (h * w) as f64;
        for v in re.iter_mut() {
            *v *= norm;
        }
        for v in im.iter_mut() {
            *v *= norm;
        }
    }
    Ok(())
}
